#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace glu_ntk {

// Invalid caller-supplied value (bad n, empty label, too few permutations...).
// The CLI maps this to a usage failure (exit code 2).
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class DimensionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConsistencyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnsupportedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DegenerateKernelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Late-stage crossing formula evaluated outside 0 < eta*lam_n < eta*lam_n_t < 1.
class RegimeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class StatisticsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DivergenceError : public std::runtime_error {
public:
    DivergenceError(std::size_t step, double loss)
        : std::runtime_error("training diverged at step " + std::to_string(step) +
                             " (loss " + std::to_string(loss) + ")"),
          step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

}  // namespace glu_ntk
