#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sigprop {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

// Operation not defined for this activation (e.g. a Dirac second derivative).
class UnsupportedError : public Error {
public:
    using Error::Error;
};

class EvaluationError : public Error {
public:
    EvaluationError(const std::string& what, double node) : Error(what), node_(node) {}
    double node() const { return node_; }

private:
    double node_;
};

// No EOC point exists for the requested parameters.
class NoEocError : public Error {
public:
    NoEocError(const std::string& what, double sigma_max = 0.0) : Error(what), sigma_max_(sigma_max) {}
    double sigma_max() const { return sigma_max_; }

private:
    double sigma_max_;
};

class NonConvergenceError : public Error {
public:
    NonConvergenceError(const std::string& what, std::vector<double> trace = {})
        : Error(what), trace_(std::move(trace)) {}
    const std::vector<double>& trace() const { return trace_; }

private:
    std::vector<double> trace_;
};

// Root bracketing failed; carries the scanned (x, y) table.
class BracketError : public Error {
public:
    BracketError(const std::string& what, std::vector<std::pair<double, double>> table)
        : Error(what), table_(std::move(table)) {}
    const std::vector<std::pair<double, double>>& table() const { return table_; }

private:
    std::vector<std::pair<double, double>> table_;
};

} // namespace sigprop
