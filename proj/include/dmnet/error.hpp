#pragma once

#include <stdexcept>
#include <string>

namespace dmnet {

// Base for all dmnet errors. The CLI maps subclasses to exit codes.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or inconsistent fold/config specification.
struct SpecError : Error {
    using Error::Error;
};

// Missing or inconsistent dataset content (empty class index, bad mask values).
struct DataError : Error {
    using Error::Error;
};

// An episode cannot be drawn (class has fewer than k+1 images).
struct SamplingError : Error {
    using Error::Error;
};

// Masked average pooling over an all-zero mask.
struct EmptyMaskError : Error {
    using Error::Error;
};

// Input image smaller than the backbone minimum.
struct SizeError : Error {
    using Error::Error;
};

// Tensor shape mismatch between operands.
struct ShapeError : Error {
    using Error::Error;
};

// Out-of-range class id into the meta memory.
struct IndexError : Error {
    using Error::Error;
};

// Non-finite values where finite ones are required.
struct NumericalError : Error {
    using Error::Error;
};

}  // namespace dmnet
