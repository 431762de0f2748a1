#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "latentbridge/core/errors.hpp"

namespace latentbridge {

/// One prompt per line; blank lines and lines starting with '#' are skipped.
inline std::vector<std::string> parse_captions(std::istream& in) {
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto b = line.find_first_not_of(" \t");
    if (b == std::string::npos || line[b] == '#') continue;
    const auto e = line.find_last_not_of(" \t");
    out.push_back(line.substr(b, e - b + 1));
  }
  return out;
}

inline std::vector<std::string> load_captions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("evaluation", "cannot read caption file '" + path + "'");
  auto captions = parse_captions(in);
  if (captions.empty()) throw InputError("evaluation", "caption file '" + path + "' has no prompts");
  return captions;
}

/// The 40-prompt toy benchmark: every attribute at +1 and -1 (16 prompts)
/// plus 24 two-attribute combinations.
inline std::vector<std::string> toy_captions(int attribute_dims = 8) {
  std::vector<std::string> out;
  for (int i = 0; i < attribute_dims; ++i) {
    out.push_back("toy:a" + std::to_string(i) + "=1");
    out.push_back("toy:a" + std::to_string(i) + "=-1");
  }
  const char* signs[] = {"1", "-1"};
  int made = 0;
  for (int step = 1; step < attribute_dims && made < 24; ++step)
    for (int i = 0; i < attribute_dims && made < 24; ++i) {
      const int j = (i + step) % attribute_dims;
      if (j < i) continue;
      out.push_back("toy:a" + std::to_string(i) + "=" + signs[made % 2] + ",a" + std::to_string(j) + "=" +
                    signs[(made / 2) % 2]);
      ++made;
    }
  return out;
}

}  // namespace latentbridge
