#pragma once

#include <array>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "psybench/scale_parser.hpp"

namespace golden {

struct ExpectedTrait {
  double value = 0.0;
  bool percent = false;
  std::size_t mentions = 1;
};

struct ParserCase {
  std::string id;
  std::string text;
  std::array<std::optional<ExpectedTrait>, 5> expect;
  std::string kind;
};

inline std::vector<ParserCase> load_parser_cases(const std::string& path) {
  std::ifstream in(path);
  std::vector<ParserCase> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    ParserCase c;
    c.id = j.at("id").get<std::string>();
    c.text = j.at("text").get<std::string>();
    c.kind = j.at("kind").get<std::string>();
    const char* letters = "OCEAN";
    for (int k = 0; k < 5; ++k) {
      const auto& e = j.at("expect").at(std::string(1, letters[k]));
      if (e.is_null()) continue;
      c.expect[k] = ExpectedTrait{e.at("value").get<double>(), e.at("percent").get<bool>(),
                                  e.at("mentions").get<std::size_t>()};
    }
    out.push_back(std::move(c));
  }
  return out;
}

/// Empty string on a match, otherwise a description of the first mismatch.
inline std::string check_case(const ParserCase& c) {
  const auto raw = psybench::extract_raw_traits(c.text);
  const char* letters = "OCEAN";
  for (int k = 0; k < 5; ++k) {
    const auto& got = raw.traits[k];
    const auto& want = c.expect[k];
    const std::string at = c.id + " " + letters[k] + ": ";
    if (got.has_value() != want.has_value()) {
      return at + (want ? "expected a value, found none" : "expected none, found a value");
    }
    if (!want) continue;
    if (got->value != want->value) {
      return at + "value " + std::to_string(got->value) + " != " + std::to_string(want->value);
    }
    if (got->percent != want->percent) return at + "percent flag differs";
    if (got->mentions != want->mentions) return at + "mention count differs";
  }
  const auto kind = std::string(psybench::mapping_kind_label(psybench::try_apply_scale(raw).diagnostic.kind));
  if (kind != c.kind) return c.id + ": mapping " + kind + " != " + c.kind;
  return {};
}

}  // namespace golden
