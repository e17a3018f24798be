#pragma once

#include <stdexcept>
#include <string>

namespace gnnrisk {

/// Base class for every error raised by the library. The category decides
/// the process exit code used by the command-line tool.
class Error : public std::runtime_error {
public:
    enum class Category { input = 2, numeric = 3, evaluation = 4 };

    Error(Category category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    Category category() const noexcept { return category_; }
    int exit_code() const noexcept { return static_cast<int>(category_); }

private:
    Category category_;
};

#define GNNRISK_DEFINE_ERROR(Name, Cat)                                       \
    class Name : public Error {                                               \
    public:                                                                   \
        explicit Name(const std::string& what) : Error(Category::Cat, what) {} \
    };

// Malformed or inconsistent input, configuration, or files.
GNNRISK_DEFINE_ERROR(ConfigError, input)
GNNRISK_DEFINE_ERROR(ParseError, input)
GNNRISK_DEFINE_ERROR(IngestionError, input)
GNNRISK_DEFINE_ERROR(BoundsError, input)
GNNRISK_DEFINE_ERROR(ShapeError, input)
GNNRISK_DEFINE_ERROR(IoError, input)
GNNRISK_DEFINE_ERROR(SplitError, input)
GNNRISK_DEFINE_ERROR(TraceError, input)
GNNRISK_DEFINE_ERROR(LabelError, input)
GNNRISK_DEFINE_ERROR(GenerationError, input)

// Checkpoint loading failures, kept distinct so callers can tell them apart.
GNNRISK_DEFINE_ERROR(VersionError, input)
GNNRISK_DEFINE_ERROR(TruncatedError, input)
GNNRISK_DEFINE_ERROR(IntegrityError, input)

GNNRISK_DEFINE_ERROR(NumericError, numeric)

GNNRISK_DEFINE_ERROR(MetricError, evaluation)
GNNRISK_DEFINE_ERROR(CalibrationError, evaluation)

#undef GNNRISK_DEFINE_ERROR

}  // namespace gnnrisk
