#include "gpfuse/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace gpfuse {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& s, const std::string& path, int line) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        if (!std::isfinite(v)) {
            std::ostringstream os;
            os << path << ":" << line << ": non-finite value '" << s << "'";
            throw IoError(os.str());
        }
        return v;
    } catch (const IoError&) {
        throw;
    } catch (const std::exception&) {
        std::ostringstream os;
        os << path << ":" << line << ": cannot parse '" << s << "' as a number";
        throw IoError(os.str());
    }
}

int header_dim(const std::vector<std::string>& cols, bool expect_y, const std::string& path) {
    const int d = static_cast<int>(cols.size()) - (expect_y ? 1 : 0);
    if (d < 1) throw IoError(path + ": header must name at least one coordinate column");
    for (int i = 0; i < d; ++i) {
        std::ostringstream want;
        want << "x" << (i + 1);
        if (trim(cols[static_cast<std::size_t>(i)]) != want.str())
            throw IoError(path + ": expected header column '" + want.str() + "', got '" +
                          cols[static_cast<std::size_t>(i)] + "'");
    }
    if (expect_y && trim(cols.back()) != "y")
        throw IoError(path + ": expected final header column 'y'");
    return d;
}

} // namespace

Dataset load_csv_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path + ": cannot open file");
    std::string line;
    if (!std::getline(in, line)) throw IoError(path + ": empty file, expected a header");
    const int d = header_dim(split_csv_line(line), true, path);

    Dataset out;
    std::vector<double> values;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cols = split_csv_line(line);
        if (static_cast<int>(cols.size()) != d + 1) {
            std::ostringstream os;
            os << path << ":" << lineno << ": expected " << d + 1 << " columns, got "
               << cols.size();
            throw IoError(os.str());
        }
        Eigen::VectorXd c(d);
        for (int i = 0; i < d; ++i) c[i] = parse_double(trim(cols[static_cast<std::size_t>(i)]), path, lineno);
        out.locations.emplace_back(std::move(c));
        values.push_back(parse_double(trim(cols.back()), path, lineno));
    }
    out.values = Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    return out;
}

std::vector<Location> load_csv_locations(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path + ": cannot open file");
    std::string line;
    if (!std::getline(in, line)) throw IoError(path + ": empty file, expected a header");
    const int d = header_dim(split_csv_line(line), false, path);

    std::vector<Location> out;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cols = split_csv_line(line);
        if (static_cast<int>(cols.size()) != d) {
            std::ostringstream os;
            os << path << ":" << lineno << ": expected " << d << " columns, got " << cols.size();
            throw IoError(os.str());
        }
        Eigen::VectorXd c(d);
        for (int i = 0; i < d; ++i) c[i] = parse_double(trim(cols[static_cast<std::size_t>(i)]), path, lineno);
        out.emplace_back(std::move(c));
    }
    return out;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    // prefer the shortest representation that round-trips
    for (int prec = 1; prec < 17; ++prec) {
        char cand[32];
        std::snprintf(cand, sizeof cand, "%.*g", prec, v);
        double back = 0.0;
        std::sscanf(cand, "%lf", &back);
        if (back == v) return cand;
    }
    return buf;
}

void write_csv_dataset(const std::string& path, const Dataset& d) {
    std::ofstream out(path);
    if (!out) throw IoError(path + ": cannot open for writing");
    const int dim = d.empty() ? 2 : d.locations.front().dim();
    for (int i = 0; i < dim; ++i) out << "x" << (i + 1) << ",";
    out << "y\n";
    for (std::size_t r = 0; r < d.size(); ++r) {
        for (int i = 0; i < dim; ++i) out << format_double(d.locations[r].coords[i]) << ",";
        out << format_double(d.values[static_cast<Eigen::Index>(r)]) << "\n";
    }
    if (!out) throw IoError(path + ": write failed");
}

void write_predictions_csv(const std::string& path, std::span<const Location> queries,
                           std::span<const PredictiveDistribution> preds) {
    if (queries.size() != preds.size())
        throw ArgumentError("write_predictions_csv: size mismatch");
    std::ofstream out(path);
    if (!out) throw IoError(path + ": cannot open for writing");
    const int dim = queries.empty() ? 2 : queries.front().dim();
    for (int i = 0; i < dim; ++i) out << "x" << (i + 1) << ",";
    out << "mean,variance,log_variance\n";
    for (std::size_t r = 0; r < queries.size(); ++r) {
        for (int i = 0; i < dim; ++i) out << format_double(queries[r].coords[i]) << ",";
        const double v = preds[r].variance;
        out << format_double(preds[r].mean) << "," << format_double(v) << ","
            << format_double(v > 0 ? std::log(v) : -std::numeric_limits<double>::infinity())
            << "\n";
    }
    if (!out) throw IoError(path + ": write failed");
}

void save_hyperparams(const std::string& path, const Hyperparams& h) {
    std::ofstream out(path);
    if (!out) throw IoError(path + ": cannot open for writing");
    out << "signal_var=" << format_double(h.signal_var) << "\n";
    out << "noise_var=" << format_double(h.noise_var) << "\n";
    out << "length_scales=";
    for (int i = 0; i < h.dim(); ++i)
        out << (i ? "," : "") << format_double(h.length_scales[i]);
    out << "\n";
    out << "prior_mean=" << format_double(h.prior_mean) << "\n";
    if (!out) throw IoError(path + ": write failed");
}

Hyperparams load_hyperparams(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path + ": cannot open file");
    Hyperparams h;
    h.length_scales.resize(0);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw IoError(path + ": malformed line " + std::to_string(lineno));
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key == "signal_var") h.signal_var = parse_double(val, path, lineno);
        else if (key == "noise_var") h.noise_var = parse_double(val, path, lineno);
        else if (key == "prior_mean") h.prior_mean = parse_double(val, path, lineno);
        else if (key == "length_scales") {
            const auto parts = split_csv_line(val);
            h.length_scales.resize(static_cast<Eigen::Index>(parts.size()));
            for (std::size_t i = 0; i < parts.size(); ++i)
                h.length_scales[static_cast<Eigen::Index>(i)] = parse_double(trim(parts[i]), path, lineno);
        } else {
            throw IoError(path + ": unknown hyperparameter key '" + key + "'");
        }
    }
    h.validate();
    return h;
}

} // namespace gpfuse
