#pragma once

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "scoreopt/errors.hpp"
#include "scoreopt/tensor.hpp"

namespace scoreopt::textio {

/// Shortest decimal form that round-trips an IEEE double exactly.
inline std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline void write_array(std::ostream& os, const std::string& name, const Tensor& t) {
    os << "array " << name;
    for (std::size_t d : t.shape()) os << ' ' << d;
    os << '\n';
    for (std::size_t i = 0; i < t.size(); ++i) {
        os << fmt_double(t[i]);
        os << (i + 1 == t.size() ? '\n' : ' ');
    }
}

inline void write_scalars(std::ostream& os, const std::string& name,
                          const std::vector<double>& xs) {
    os << "scalars " << name << ' ' << xs.size() << '\n';
    for (std::size_t i = 0; i < xs.size(); ++i) {
        os << fmt_double(xs[i]);
        os << (i + 1 == xs.size() ? '\n' : ' ');
    }
}

/// Whitespace-delimited token reader with typed extraction errors.
class TokenReader {
  public:
    explicit TokenReader(std::istream& is) : is_(is) {}

    std::string word() {
        std::string t;
        if (!(is_ >> t)) throw ConfigError("model file: unexpected end of input");
        return t;
    }
    double real() {
        std::string t = word();
        try {
            std::size_t pos = 0;
            double v = std::stod(t, &pos);
            if (pos != t.size()) throw std::invalid_argument(t);
            return v;
        } catch (const std::exception&) {
            throw ConfigError("model file: expected a number, got '" + t + "'");
        }
    }
    long long integer() {
        std::string t = word();
        try {
            std::size_t pos = 0;
            long long v = std::stoll(t, &pos);
            if (pos != t.size()) throw std::invalid_argument(t);
            return v;
        } catch (const std::exception&) {
            throw ConfigError("model file: expected an integer, got '" + t + "'");
        }
    }
    void expect(const std::string& tok) {
        std::string t = word();
        if (t != tok) throw ConfigError("model file: expected '" + tok + "', got '" + t + "'");
    }

    Tensor array(const std::string& name, std::size_t rank) {
        expect("array");
        expect(name);
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape) d = static_cast<std::size_t>(integer());
        Tensor t(shape);
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = real();
        return t;
    }

    std::vector<double> scalars(const std::string& name) {
        expect("scalars");
        expect(name);
        const auto n = static_cast<std::size_t>(integer());
        std::vector<double> xs(n);
        for (auto& x : xs) x = real();
        return xs;
    }

  private:
    std::istream& is_;
};

}  // namespace scoreopt::textio
