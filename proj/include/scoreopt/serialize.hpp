#pragma once

#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "scoreopt/classifier.hpp"
#include "scoreopt/errors.hpp"
#include "scoreopt/gmm.hpp"
#include "scoreopt/score_net.hpp"
#include "scoreopt/text_format.hpp"

namespace scoreopt {

/// Dispatches on the leading "kind" token; every score model writes one.
inline std::unique_ptr<ScoreModel> load_score_model(textio::TokenReader& r) {
    r.expect("kind");
    const std::string kind = r.word();
    if (kind == "gmm") return std::make_unique<GmmModel>(GmmModel::load(r));
    if (kind == "mlp") return std::make_unique<MlpScoreNet>(MlpScoreNet::load(r));
    throw ConfigError("unknown score model kind '" + kind + "'");
}

inline std::ifstream open_for_reading(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError(path, "cannot open for reading");
    return is;
}

inline std::ofstream open_for_writing(const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError(path, "cannot open for writing");
    return os;
}

template <class Saveable>
void save_text_file(const Saveable& obj, const std::string& path) {
    std::ofstream os = open_for_writing(path);
    obj.save(os);
    os.flush();
    if (!os) throw IoError(path, "write failed");
}

inline std::unique_ptr<ScoreModel> load_score_model_file(const std::string& path) {
    std::ifstream is = open_for_reading(path);
    textio::TokenReader r(is);
    return load_score_model(r);
}

inline Classifier load_classifier_file(const std::string& path) {
    std::ifstream is = open_for_reading(path);
    textio::TokenReader r(is);
    r.expect("kind");
    r.expect("clf");
    return Classifier::load(r);
}

/// CSV with header x1,...,xd,label; full-precision doubles.
inline void save_dataset_csv(const LabeledSet& set, const std::string& path) {
    if (set.size() == 0) throw ContractViolation("save_dataset_csv: empty dataset");
    std::ofstream os = open_for_writing(path);
    const std::size_t d = set.dim();
    for (std::size_t i = 0; i < d; ++i) os << 'x' << (i + 1) << ',';
    os << "label\n";
    for (std::size_t i = 0; i < set.size(); ++i) {
        for (std::size_t j = 0; j < d; ++j) os << textio::fmt_double(set.points[i][j]) << ',';
        os << set.labels[i] << '\n';
    }
    os.flush();
    if (!os) throw IoError(path, "write failed");
}

inline LabeledSet load_dataset_csv(const std::string& path) {
    std::ifstream is = open_for_reading(path);
    std::string line;
    if (!std::getline(is, line)) throw IoError(path, "missing csv header");
    std::size_t d = 0;
    {
        std::stringstream header(line);
        std::string col;
        while (std::getline(header, col, ',')) {
            if (col == "label") break;
            ++d;
        }
        if (d == 0) throw IoError(path, "csv header has no coordinate columns");
    }
    LabeledSet set;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream row(line);
        std::string cell;
        Tensor x({d});
        for (std::size_t j = 0; j < d; ++j) {
            if (!std::getline(row, cell, ','))
                throw IoError(path, "csv line " + std::to_string(line_no) + ": too few columns");
            try {
                std::size_t pos = 0;
                x[j] = std::stod(cell, &pos);
                if (pos != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw IoError(path, "csv line " + std::to_string(line_no) + ": bad number '" +
                                        cell + "'");
            }
        }
        if (!std::getline(row, cell, ','))
            throw IoError(path, "csv line " + std::to_string(line_no) + ": missing label");
        int label = 0;
        try {
            std::size_t pos = 0;
            label = std::stoi(cell, &pos);
            if (pos != cell.size()) throw std::invalid_argument(cell);
        } catch (const std::exception&) {
            throw IoError(path,
                          "csv line " + std::to_string(line_no) + ": bad label '" + cell + "'");
        }
        set.points.push_back(std::move(x));
        set.labels.push_back(label);
    }
    if (set.size() == 0) throw IoError(path, "csv contains no data rows");
    return set;
}

}  // namespace scoreopt
