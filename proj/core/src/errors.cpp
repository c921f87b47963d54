#include "psybench/errors.hpp"

#include "psybench/util.hpp"

namespace psybench {

OutOfRangeError::OutOfRangeError(char component, double value)
    : Error(std::string("trait ") + component + " out of range [0,100]: " + format_number(value)),
      component_(component),
      value_(value) {}

NonFiniteError::NonFiniteError(char component)
    : Error(std::string("trait ") + component + " is not finite"), component_(component) {}

KTooLargeError::KTooLargeError(std::size_t k, std::size_t available)
    : Error("requested " + std::to_string(k) + " configurations but only " +
            std::to_string(available) + " available") {}

LeakageError::LeakageError(std::string field, std::string match)
    : SchemaError("trait leakage in field '" + field + "': \"" + match + "\""),
      field_(std::move(field)),
      match_(std::move(match)) {}

namespace {
std::string join_letters(const std::vector<char>& letters) {
  std::string s;
  for (char c : letters) {
    if (!s.empty()) s += ',';
    s += c;
  }
  return s;
}
}  // namespace

UnparsableError::UnparsableError(std::vector<char> missing)
    : Error("unparsable prediction; missing traits: " + join_letters(missing)),
      missing_(std::move(missing)) {}

TemplateUnresolvedError::TemplateUnresolvedError(std::string slot)
    : Error("template slot has no binding: {{" + slot + "}}"), slot_(std::move(slot)) {}

TransportError::TransportError(int status, const std::string& detail)
    : Error("transport error (status " + std::to_string(status) + "): " + detail),
      status_(status) {}

UnknownSymbolError::UnknownSymbolError(char symbol)
    : Error(std::string("symbol not in alphabet: '") + symbol + "'"), symbol_(symbol) {}

UnknownComponentError::UnknownComponentError(const std::string& name)
    : Error("unknown ablation component: " + name) {}

MissingRowError::MissingRowError(const std::string& row) : Error("missing required row: " + row) {}

}  // namespace psybench
