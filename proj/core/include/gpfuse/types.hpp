#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace gpfuse {

/// Bad caller input (dimension mismatch, invalid config, ...). CLI exit code 2.
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical failure that survived the jitter ladder. CLI exit code 3.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File / parse problem. CLI exit code 4.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A point in the d-dimensional input domain.
struct Location {
    Eigen::VectorXd coords;

    Location() = default;
    explicit Location(Eigen::VectorXd c) : coords(std::move(c)) {}
    Location(double x, double y) : coords(2) { coords << x, y; }

    int dim() const { return static_cast<int>(coords.size()); }
    bool finite() const { return coords.allFinite(); }

    friend bool operator==(const Location& a, const Location& b) {
        return a.coords.size() == b.coords.size() && a.coords == b.coords;
    }
};

/// Squared-exponential kernel and constant-mean parameters.
struct Hyperparams {
    double signal_var = 1.0;            // sigma_s^2
    double noise_var = 0.0;             // sigma_n^2
    Eigen::VectorXd length_scales;      // diagonal of Lambda, one per input dim
    double prior_mean = 0.0;

    int dim() const { return static_cast<int>(length_scales.size()); }

    void validate() const {
        if (!(signal_var > 0.0))
            throw ArgumentError("Hyperparams: signal_var must be > 0");
        if (!(noise_var >= 0.0))
            throw ArgumentError("Hyperparams: noise_var must be >= 0");
        if (length_scales.size() == 0 || !(length_scales.array() > 0.0).all())
            throw ArgumentError("Hyperparams: every length_scale must be > 0");
    }

    static Hyperparams isotropic(double sv, double nv, double ell, int d, double mean = 0.0) {
        Hyperparams h;
        h.signal_var = sv;
        h.noise_var = nv;
        h.length_scales = Eigen::VectorXd::Constant(d, ell);
        h.prior_mean = mean;
        return h;
    }
};

/// Observed locations plus their measurements, in matching order.
struct Dataset {
    std::vector<Location> locations;
    Eigen::VectorXd values;

    Dataset() : values(0) {}

    std::size_t size() const { return locations.size(); }
    bool empty() const { return locations.empty(); }

    void append(Location loc, double value) {
        locations.push_back(std::move(loc));
        values.conservativeResize(values.size() + 1);
        values[values.size() - 1] = value;
    }

    void validate() const {
        if (static_cast<Eigen::Index>(locations.size()) != values.size())
            throw ArgumentError("Dataset: |locations| != |values|");
        if (!values.allFinite())
            throw ArgumentError("Dataset: non-finite measurement");
        for (const Location& l : locations)
            if (!l.finite()) throw ArgumentError("Dataset: non-finite location");
    }
};

struct PredictiveDistribution {
    double mean = 0.0;
    double variance = 0.0;
};

/// Opaque identifier of the support set a summary is expressed in.
using SupportId = std::uint64_t;

} // namespace gpfuse
