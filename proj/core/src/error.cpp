#include "probe/error.hpp"

namespace probe {

SchemaError::SchemaError(const std::string& what, std::size_t row, std::string field)
    : Error(what), row_(row), field_(std::move(field)) {}

}  // namespace probe
