#include "seastate/errors.hpp"

namespace seastate {

const char* category_name(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::usage: return "usage";
    case ErrorCategory::config: return "config";
    case ErrorCategory::data: return "data";
    case ErrorCategory::asset: return "asset";
    case ErrorCategory::runtime: return "runtime";
  }
  return "unknown";
}

}  // namespace seastate
