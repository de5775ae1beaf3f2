#include "lpdm/checkpoint.h"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lpdm/errors.h"

namespace lpdm {

namespace {

constexpr char kMagic[5] = {'L', 'P', 'D', 'M', '1'};

void append_bytes(std::vector<unsigned char>& buf, const void* p, size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    buf.insert(buf.end(), b, b + n);
}

template <typename T>
void append_le(std::vector<unsigned char>& buf, T v) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
        std::reverse(b, b + sizeof(T));
    append_bytes(buf, b, sizeof(T));
}

void append_f32_array(std::vector<unsigned char>& buf, const std::vector<float>& v) {
    if constexpr (std::endian::native == std::endian::little) {
        append_bytes(buf, v.data(), v.size() * sizeof(float));
    } else {
        for (float x : v) append_le(buf, x);
    }
}

class Reader {
  public:
    Reader(const unsigned char* p, size_t n) : p_(p), n_(n) {}

    template <typename T>
    T read_le() {
        need(sizeof(T));
        unsigned char b[sizeof(T)];
        std::memcpy(b, p_ + pos_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big)
            std::reverse(b, b + sizeof(T));
        T v;
        std::memcpy(&v, b, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    std::string read_string(size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(p_ + pos_), n);
        pos_ += n;
        return s;
    }

    std::vector<float> read_f32_array(size_t count) {
        need(count * sizeof(float));
        std::vector<float> v(count);
        if constexpr (std::endian::native == std::endian::little) {
            std::memcpy(v.data(), p_ + pos_, count * sizeof(float));
            pos_ += count * sizeof(float);
        } else {
            for (size_t i = 0; i < count; ++i) v[i] = read_le<float>();
        }
        return v;
    }

    size_t remaining() const { return n_ - pos_; }

  private:
    void need(size_t n) const {
        if (pos_ + n > n_) throw DataError("checkpoint ends unexpectedly");
    }
    const unsigned char* p_;
    size_t n_, pos_ = 0;
};

}  // namespace

const TensorRecord* Checkpoint::find(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.name == name) return &t;
    return nullptr;
}

const std::string& Checkpoint::require(const std::string& key) const {
    auto it = meta.find(key);
    if (it == meta.end()) throw DataError("checkpoint header missing key '" + key + "'");
    return it->second;
}

uint64_t fnv1a64(const unsigned char* data, size_t n) {
    uint64_t h = 14695981039346656037ULL;
    for (size_t i = 0; i < n; ++i) {
        h ^= data[i];
        h *= 1099511628211ULL;
    }
    return h;
}

void save_checkpoint_file(const std::string& path, const Checkpoint& ck) {
    std::string header;
    for (const auto& [k, v] : ck.meta) {
        if (k.find_first_of("=\n") != std::string::npos ||
            v.find('\n') != std::string::npos)
            throw ConfigError("checkpoint meta key/value may not contain '=' or newline");
        header += k + "=" + v + "\n";
    }

    std::vector<unsigned char> buf;
    append_bytes(buf, kMagic, sizeof(kMagic));
    append_le<uint64_t>(buf, header.size());
    append_bytes(buf, header.data(), header.size());
    for (const auto& t : ck.tensors) {
        size_t numel = 1;
        for (int d : t.shape) numel *= static_cast<size_t>(d);
        if (numel != t.data.size())
            throw ConfigError("tensor '" + t.name + "' shape does not match data size");
        append_le<uint32_t>(buf, static_cast<uint32_t>(t.name.size()));
        append_bytes(buf, t.name.data(), t.name.size());
        append_le<uint32_t>(buf, static_cast<uint32_t>(t.shape.size()));
        for (int d : t.shape) append_le<int32_t>(buf, d);
        append_f32_array(buf, t.data);
    }
    append_le<uint64_t>(buf, fnv1a64(buf.data(), buf.size()));

    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw DataError("cannot open '" + tmp + "' for writing");
        f.write(reinterpret_cast<const char*>(buf.data()),
                static_cast<std::streamsize>(buf.size()));
        if (!f) throw DataError("write failed for '" + tmp + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw DataError("cannot move checkpoint into place at '" + path + "'");
}

Checkpoint load_checkpoint_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw DataError("cannot open checkpoint '" + path + "'");
    const auto size = static_cast<size_t>(f.tellg());
    f.seekg(0);
    std::vector<unsigned char> buf(size);
    f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(size));
    if (!f) throw DataError("cannot read checkpoint '" + path + "'");

    if (size < sizeof(kMagic) + 16 || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
        throw DataError("'" + path + "' is not an LPDM1 checkpoint");
    Reader footer(buf.data() + size - 8, 8);
    const uint64_t stored = footer.read_le<uint64_t>();
    if (fnv1a64(buf.data(), size - 8) != stored)
        throw DataError("checksum mismatch in '" + path + "' (truncated or corrupt)");

    Reader r(buf.data() + sizeof(kMagic), size - sizeof(kMagic) - 8);
    Checkpoint ck;
    const auto header_len = r.read_le<uint64_t>();
    std::istringstream hs(r.read_string(header_len));
    std::string line;
    while (std::getline(hs, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError("malformed checkpoint header line: " + line);
        ck.meta[line.substr(0, eq)] = line.substr(eq + 1);
    }
    while (r.remaining() > 0) {
        TensorRecord t;
        t.name = r.read_string(r.read_le<uint32_t>());
        const auto ndim = r.read_le<uint32_t>();
        if (ndim > 8) throw DataError("implausible tensor rank in checkpoint");
        size_t numel = 1;
        for (uint32_t i = 0; i < ndim; ++i) {
            const auto d = r.read_le<int32_t>();
            if (d <= 0) throw DataError("non-positive tensor dim in checkpoint");
            t.shape.push_back(d);
            numel *= static_cast<size_t>(d);
        }
        t.data = r.read_f32_array(numel);
        ck.tensors.push_back(std::move(t));
    }
    return ck;
}

namespace {

std::string join_ints(const std::vector<int>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

std::vector<int> split_ints(const std::string& s) {
    std::vector<int> out;
    std::istringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    return out;
}

}  // namespace

void meta_set_unet_config(Checkpoint& ck, const UNetConfig& cfg) {
    ck.meta["model.in_channels"] = std::to_string(cfg.in_channels);
    ck.meta["model.out_channels"] = std::to_string(cfg.out_channels);
    ck.meta["model.stage_channels"] = join_ints(cfg.stage_channels);
    ck.meta["model.blocks_per_stage"] = std::to_string(cfg.blocks_per_stage);
    ck.meta["model.time_embed_base_dim"] = std::to_string(cfg.time_embed_base_dim);
    ck.meta["model.time_embed_dim"] = std::to_string(cfg.time_embed_dim);
    ck.meta["model.attention_heads"] = std::to_string(cfg.attention_heads);
    ck.meta["model.groupnorm_groups"] = std::to_string(cfg.groupnorm_groups);
}

UNetConfig unet_config_from_meta(const Checkpoint& ck) {
    UNetConfig cfg;
    cfg.in_channels = std::stoi(ck.require("model.in_channels"));
    cfg.out_channels = std::stoi(ck.require("model.out_channels"));
    cfg.stage_channels = split_ints(ck.require("model.stage_channels"));
    cfg.blocks_per_stage = std::stoi(ck.require("model.blocks_per_stage"));
    cfg.time_embed_base_dim = std::stoi(ck.require("model.time_embed_base_dim"));
    cfg.time_embed_dim = std::stoi(ck.require("model.time_embed_dim"));
    cfg.attention_heads = std::stoi(ck.require("model.attention_heads"));
    cfg.groupnorm_groups = std::stoi(ck.require("model.groupnorm_groups"));
    cfg.validate();
    return cfg;
}

}  // namespace lpdm
