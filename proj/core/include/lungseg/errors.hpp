#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lungseg {

/// Base of every error thrown by the library. `kind()` is a stable short tag
/// ("SizeMismatch", "NoMarkers", ...) that the CLI prints and tests match on.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define LUNGSEG_DEFINE_ERROR(Name)                                            \
    class Name : public Error {                                               \
    public:                                                                   \
        explicit Name(const std::string& what) : Error(#Name, what) {}        \
    }

// imgio
LUNGSEG_DEFINE_ERROR(FileMissing);
LUNGSEG_DEFINE_ERROR(UnsupportedFormat);
LUNGSEG_DEFINE_ERROR(DecodeError);
LUNGSEG_DEFINE_ERROR(ZeroDimension);
LUNGSEG_DEFINE_ERROR(TooFewEntries);
LUNGSEG_DEFINE_ERROR(DimMismatch);
LUNGSEG_DEFINE_ERROR(WriteError);

// tensorcore
LUNGSEG_DEFINE_ERROR(ShapeMismatch);
LUNGSEG_DEFINE_ERROR(OddDimension);
LUNGSEG_DEFINE_ERROR(SpatialMismatch);
LUNGSEG_DEFINE_ERROR(MissingGradient);
LUNGSEG_DEFINE_ERROR(CheckpointError);

// unet
LUNGSEG_DEFINE_ERROR(InvalidConfig);
LUNGSEG_DEFINE_ERROR(MissingMask);
LUNGSEG_DEFINE_ERROR(EmptyDataset);

// classical
LUNGSEG_DEFINE_ERROR(EmptyImage);
LUNGSEG_DEFINE_ERROR(NoMarkers);

// metrics
LUNGSEG_DEFINE_ERROR(EmptyScores);

// cli
LUNGSEG_DEFINE_ERROR(ModelRequired);
LUNGSEG_DEFINE_ERROR(MissingImagesDir);
LUNGSEG_DEFINE_ERROR(UsageError);

#undef LUNGSEG_DEFINE_ERROR

/// Raw file length does not match width * height * 2.
class SizeMismatch : public Error {
public:
    SizeMismatch(std::size_t expected, std::size_t actual)
        : Error("SizeMismatch", "expected " + std::to_string(expected) +
                                    " bytes, got " + std::to_string(actual)),
          expected_(expected), actual_(actual) {}

    std::size_t expected_bytes() const noexcept { return expected_; }
    std::size_t actual_bytes() const noexcept { return actual_; }

private:
    std::size_t expected_;
    std::size_t actual_;
};

}  // namespace lungseg
