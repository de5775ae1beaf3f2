#ifndef LPDM_CONFIG_H
#define LPDM_CONFIG_H

#include <map>
#include <string>

namespace lpdm {

/// Parses a "key = value" structured text file: one pair per line, '#' starts
/// a comment, blank lines ignored, whitespace trimmed. Duplicate keys keep
/// the last value.
std::map<std::string, std::string> parse_config_file(const std::string& path);

}  // namespace lpdm

#endif
