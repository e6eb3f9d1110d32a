#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "scoreopt/classifier.hpp"
#include "scoreopt/errors.hpp"
#include "scoreopt/gmm.hpp"
#include "scoreopt/rng.hpp"
#include "scoreopt/tensor.hpp"

namespace scoreopt {

/// Synthetic dataset families. The gmm-classes family places `modes` equal
/// Gaussians on a circle, collapses them onto `classes` labels (mode k ->
/// class k mod classes), and scales the mixture so each coordinate of the
/// circle plane has unit variance; `separation` is the distance between
/// adjacent mode centers measured in per-mode standard deviations.
struct DatasetKind {
    enum class Family { GmmClasses, TwoMoons, Rings };

    Family family = Family::GmmClasses;
    std::size_t modes = 8;
    std::size_t classes = 4;
    double separation = 6.0;
    std::size_t dim = 2;
    double noise = 0.1;  // jitter for two-moons / rings

    static DatasetKind gmm_classes(std::size_t modes, std::size_t classes, double separation,
                                   std::size_t dim = 2) {
        DatasetKind k;
        k.family = Family::GmmClasses;
        k.modes = modes;
        k.classes = classes;
        k.separation = separation;
        k.dim = dim;
        k.validate();
        return k;
    }

    static DatasetKind two_moons(double noise = 0.1) {
        DatasetKind k;
        k.family = Family::TwoMoons;
        k.classes = 2;
        k.dim = 2;
        k.noise = noise;
        k.validate();
        return k;
    }

    static DatasetKind rings(std::size_t classes, double noise = 0.1) {
        DatasetKind k;
        k.family = Family::Rings;
        k.classes = classes;
        k.dim = 2;
        k.noise = noise;
        k.validate();
        return k;
    }

    void validate() const {
        switch (family) {
            case Family::GmmClasses:
                if (modes < 2 || classes < 2 || classes > modes)
                    throw ConfigError("gmm-classes: need 2 <= classes <= modes");
                if (!(separation > 0.0)) throw ConfigError("gmm-classes: separation must be > 0");
                if (dim < 2) throw ConfigError("gmm-classes: dim must be >= 2");
                break;
            case Family::TwoMoons:
            case Family::Rings:
                if (classes < 2) throw ConfigError("dataset: need at least 2 classes");
                if (!(noise >= 0.0)) throw ConfigError("dataset: noise must be >= 0");
                break;
        }
    }
};

namespace detail {

/// Circle radius and per-mode variance for gmm-classes under the unit
/// coordinate-variance convention: with chord factor u = 2 sin(pi/K) and
/// separation s, solving  R^2/2 + v = 1  and  R u = s sqrt(v)  gives
/// R = 1/sqrt(1/2 + u^2/s^2).
struct GmmGeometry {
    double radius;
    double mode_var;
};

inline GmmGeometry gmm_geometry(std::size_t modes, double separation) {
    const double u = 2.0 * std::sin(std::numbers::pi / static_cast<double>(modes));
    const double r = 1.0 / std::sqrt(0.5 + u * u / (separation * separation));
    const double v = r * u / separation;
    return {r, v * v};
}

}  // namespace detail

/// The analytic mixture matching a gmm-classes kind; the exact prior for
/// purification on that data.
inline GmmModel gmm_for_kind(const DatasetKind& kind) {
    kind.validate();
    if (kind.family != DatasetKind::Family::GmmClasses)
        throw ConfigError("gmm_for_kind: only the gmm-classes family has an analytic mixture");
    const auto geo = detail::gmm_geometry(kind.modes, kind.separation);
    std::vector<double> w(kind.modes, 1.0 / static_cast<double>(kind.modes));
    std::vector<Tensor> mu;
    std::vector<double> v(kind.modes, geo.mode_var);
    for (std::size_t k = 0; k < kind.modes; ++k) {
        const double th = 2.0 * std::numbers::pi * static_cast<double>(k) /
                          static_cast<double>(kind.modes);
        Tensor m({kind.dim});
        m[0] = geo.radius * std::cos(th);
        m[1] = geo.radius * std::sin(th);
        mu.push_back(std::move(m));
    }
    return GmmModel(std::move(w), std::move(mu), std::move(v));
}

/// Draws n labeled points, class-balanced to within one sample (sample i gets
/// class i mod classes); deterministic per seed.
inline LabeledSet gen_dataset(const DatasetKind& kind, std::size_t n, std::uint64_t seed) {
    kind.validate();
    if (n == 0) throw ContractViolation("gen_dataset: n must be >= 1");
    RngStream rng(seed);
    LabeledSet set;
    set.points.reserve(n);
    set.labels.reserve(n);

    switch (kind.family) {
        case DatasetKind::Family::GmmClasses: {
            const GmmModel prior = gmm_for_kind(kind);
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t c = i % kind.classes;
                // modes carrying class c are c, c+C, c+2C, ...
                const std::size_t per_class = (kind.modes - c - 1) / kind.classes + 1;
                const auto j = static_cast<std::size_t>(rng.uniform01() *
                                                        static_cast<double>(per_class));
                set.points.push_back(prior.sample_from(c + j * kind.classes, rng));
                set.labels.push_back(static_cast<int>(c));
            }
            break;
        }
        case DatasetKind::Family::TwoMoons: {
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t c = i % 2;
                const double t = rng.uniform01() * std::numbers::pi;
                Tensor x({2});
                if (c == 0) {
                    x[0] = std::cos(t);
                    x[1] = std::sin(t);
                } else {
                    x[0] = 1.0 - std::cos(t);
                    x[1] = 0.5 - std::sin(t);
                }
                x[0] += kind.noise * rng.normal();
                x[1] += kind.noise * rng.normal();
                set.points.push_back(std::move(x));
                set.labels.push_back(static_cast<int>(c));
            }
            break;
        }
        case DatasetKind::Family::Rings: {
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t c = i % kind.classes;
                const double r = 1.0 + static_cast<double>(c);
                const double th = rng.uniform01() * 2.0 * std::numbers::pi;
                Tensor x({2});
                x[0] = r * std::cos(th) + kind.noise * rng.normal();
                x[1] = r * std::sin(th) + kind.noise * rng.normal();
                set.points.push_back(std::move(x));
                set.labels.push_back(static_cast<int>(c));
            }
            break;
        }
    }
    return set;
}

/// Bayes-optimal label under the analytic mixture with mode k -> class
/// k mod classes: argmax over classes of summed component responsibilities.
inline int bayes_predict(const GmmModel& prior, std::size_t classes, const Tensor& x) {
    if (classes < 2 || classes > prior.components())
        throw ContractViolation("bayes_predict: class count out of range");
    const std::vector<double> r = prior.responsibilities(x, 0.0);
    std::vector<double> per_class(classes, 0.0);
    for (std::size_t k = 0; k < r.size(); ++k) per_class[k % classes] += r[k];
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c)
        if (per_class[c] > per_class[best]) best = c;
    return static_cast<int>(best);
}

/// "gmm-classes[:modes=8,classes=4,sep=6,dim=2]", "two-moons[:noise=0.1]",
/// or "rings[:classes=3,noise=0.1]".
inline DatasetKind parse_dataset_kind(const std::string& text) {
    const std::size_t colon = text.find(':');
    const std::string name = text.substr(0, colon);
    DatasetKind kind;
    if (name == "gmm-classes") {
        kind = DatasetKind::gmm_classes(8, 4, 6.0);
    } else if (name == "two-moons") {
        kind = DatasetKind::two_moons();
    } else if (name == "rings") {
        kind = DatasetKind::rings(2);
    } else {
        throw ConfigError("unknown dataset kind '" + name + "'");
    }

    std::string rest = colon == std::string::npos ? "" : text.substr(colon + 1);
    while (!rest.empty()) {
        const std::size_t comma = rest.find(',');
        const std::string item = rest.substr(0, comma);
        rest = comma == std::string::npos ? "" : rest.substr(comma + 1);
        const std::size_t eq = item.find('=');
        if (eq == std::string::npos)
            throw ConfigError("dataset kind: expected key=value, got '" + item + "'");
        const std::string key = item.substr(0, eq);
        const std::string val = item.substr(eq + 1);
        double num = 0.0;
        try {
            std::size_t pos = 0;
            num = std::stod(val, &pos);
            if (pos != val.size()) throw ConfigError("");
        } catch (const std::exception&) {
            throw ConfigError("dataset kind: bad numeric value '" + val + "'");
        }
        if (key == "modes" && kind.family == DatasetKind::Family::GmmClasses)
            kind.modes = static_cast<std::size_t>(num);
        else if (key == "classes" && kind.family != DatasetKind::Family::TwoMoons)
            kind.classes = static_cast<std::size_t>(num);
        else if (key == "sep" && kind.family == DatasetKind::Family::GmmClasses)
            kind.separation = num;
        else if (key == "dim" && kind.family == DatasetKind::Family::GmmClasses)
            kind.dim = static_cast<std::size_t>(num);
        else if (key == "noise" && kind.family != DatasetKind::Family::GmmClasses)
            kind.noise = num;
        else
            throw ConfigError("dataset kind: unknown key '" + key + "' for " + name);
    }
    kind.validate();
    return kind;
}

inline std::string dataset_kind_to_string(const DatasetKind& kind) {
    auto fmt = [](double v) {
        std::string s = std::to_string(v);
        while (s.size() > 1 && s.back() == '0') s.pop_back();
        if (!s.empty() && s.back() == '.') s.pop_back();
        return s;
    };
    switch (kind.family) {
        case DatasetKind::Family::GmmClasses:
            return "gmm-classes:modes=" + std::to_string(kind.modes) +
                   ",classes=" + std::to_string(kind.classes) + ",sep=" + fmt(kind.separation) +
                   ",dim=" + std::to_string(kind.dim);
        case DatasetKind::Family::TwoMoons:
            return "two-moons:noise=" + fmt(kind.noise);
        case DatasetKind::Family::Rings:
            return "rings:classes=" + std::to_string(kind.classes) + ",noise=" + fmt(kind.noise);
    }
    throw ContractViolation("dataset_kind_to_string: unreachable");
}

}  // namespace scoreopt
