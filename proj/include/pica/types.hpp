#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace pica {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Parameter/precondition violations (bad shapes, out-of-range values).
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed or unsupported file content.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Inconsistent multi-file input (length or rate mismatch).
class IngestionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Rank-deficient or otherwise unusable numeric input.
class DegenerateInputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-finite values or failed factorizations mid-computation.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Ground-truth sources S: rows are sources, columns are time samples.
struct SourceMatrix {
    Matrix data;
    double sample_rate = 0.0;  // informational

    Eigen::Index sources() const { return data.rows(); }
    Eigen::Index samples() const { return data.cols(); }
};

// Observed mixtures X = A * S: rows are sensors.
struct MixtureMatrix {
    Matrix data;

    Eigen::Index sensors() const { return data.rows(); }
    Eigen::Index samples() const { return data.cols(); }
};

// Square mixing operator A.
struct MixingMatrix {
    Matrix data;

    Eigen::Index size() const { return data.rows(); }
};

}  // namespace pica
