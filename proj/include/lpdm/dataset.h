#ifndef LPDM_DATASET_H
#define LPDM_DATASET_H

#include <string>
#include <vector>

#include "lpdm/rng.h"
#include "lpdm/tensor.h"

namespace lpdm {

/// One training pair: x0 is the normally-exposed target, c the under-exposed
/// conditioning image. Both 3xHxW in [-1,1] with identical shape.
struct PairedSample {
    Tensor x0, c;
};

class TrainDataset {
  public:
    virtual ~TrainDataset() = default;
    virtual size_t size() const = 0;
    virtual PairedSample get(size_t i) const = 0;
};

/// Pairs matched by filename across two directories; images decode lazily in
/// get(). Every file in low_dir must have a same-named file in high_dir.
class DirectoryDataset : public TrainDataset {
  public:
    DirectoryDataset(const std::string& low_dir, const std::string& high_dir);
    size_t size() const override { return names_.size(); }
    PairedSample get(size_t i) const override;
    const std::vector<std::string>& names() const { return names_; }

  private:
    std::string low_dir_, high_dir_;
    std::vector<std::string> names_;
};

class MemoryDataset : public TrainDataset {
  public:
    explicit MemoryDataset(std::vector<PairedSample> samples)
        : samples_(std::move(samples)) {}
    size_t size() const override { return samples_.size(); }
    PairedSample get(size_t i) const override { return samples_[i]; }

  private:
    std::vector<PairedSample> samples_;
};

/// Reflect-pads right/bottom so the result is at least min_h x min_w.
Tensor reflect_pad_to(const Tensor& x, int min_h, int min_w);

/// Identical random crop window and flip decision for both images of the
/// pair; inputs smaller than crop_size are reflect-padded first.
PairedSample augment_pair(const PairedSample& s, int crop_size, double hflip_prob,
                          Rng& rng);

Tensor crop(const Tensor& x, int y0, int x0, int h, int w);
Tensor hflip(const Tensor& x);

}  // namespace lpdm

#endif
