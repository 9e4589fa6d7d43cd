#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace despeckle {

enum class ErrorCategory {
    Config,     // bad or contradictory configuration, strict-parse failures
    Dimension,  // image/region size preconditions
    Shape,      // tensor shape contracts inside the networks
    Numeric,    // non-finite losses or logits
    Io,         // unreadable/unwritable files
    MissingInput,
};

constexpr std::string_view category_name(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::Config: return "config";
        case ErrorCategory::Dimension: return "dimension";
        case ErrorCategory::Shape: return "shape";
        case ErrorCategory::Numeric: return "numeric";
        case ErrorCategory::Io: return "io";
        case ErrorCategory::MissingInput: return "missing_input";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

#define DESPECKLE_DEFINE_ERROR(Name, Cat)                                   \
    class Name : public Error {                                             \
    public:                                                                 \
        explicit Name(const std::string& what) : Error(ErrorCategory::Cat, what) {} \
    };

DESPECKLE_DEFINE_ERROR(ConfigError, Config)
DESPECKLE_DEFINE_ERROR(DimensionError, Dimension)
DESPECKLE_DEFINE_ERROR(ShapeError, Shape)
DESPECKLE_DEFINE_ERROR(NumericError, Numeric)
DESPECKLE_DEFINE_ERROR(IoError, Io)
DESPECKLE_DEFINE_ERROR(MissingInputError, MissingInput)

#undef DESPECKLE_DEFINE_ERROR

}  // namespace despeckle
