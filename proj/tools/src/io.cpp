#include "emtp2_cli/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace emtp2::cli {
namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double parse_number(std::string_view field, std::size_t line) {
    field = trim(field);
    if (!field.empty() && field.front() == '+') {
        field.remove_prefix(1);
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
        throw ParseError("line " + std::to_string(line) + ": cannot parse number '" + std::string(field) + "'");
    }
    return value;
}

}  // namespace

Eigen::MatrixXd read_matrix_csv(std::istream& in) {
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view view = trim(line);
        if (view.empty()) {
            continue;
        }
        std::vector<double> row;
        std::size_t start = 0;
        while (true) {
            const auto comma = view.find(',', start);
            row.push_back(parse_number(view.substr(start, comma - start), line_no));
            if (comma == std::string_view::npos) {
                break;
            }
            start = comma + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw ParseError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(rows.front().size()) + " fields, found " + std::to_string(row.size()));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) {
        throw ParseError("matrix file is empty");
    }
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return m;
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open " + path.string());
    }
    try {
        return read_matrix_csv(in);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m) {
    char buf[32];
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
            if (j > 0) {
                out << ',';
            }
            out << buf;
        }
        out << '\n';
    }
}

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    write_matrix_csv(out, m);
}

Variogram read_variogram(const std::filesystem::path& path, std::string* warning) {
    Eigen::MatrixXd m = read_matrix_csv(path);
    if (m.rows() != m.cols()) {
        throw InvalidInput("variogram must be square, got " + std::to_string(m.rows()) + "x" +
                           std::to_string(m.cols()));
    }
    if (!m.allFinite()) {
        throw InvalidInput("variogram has non-finite entries");
    }
    const double scale = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * scale && warning != nullptr) {
        *warning = "variogram asymmetric (max |G - G^T| = " + std::to_string(asym) + "); symmetrized";
    }
    m = 0.5 * (m + m.transpose()).eval();
    return Variogram(m);
}

std::string graph_json(std::size_t d, const std::vector<Edge>& edges) {
    nlohmann::ordered_json j;
    j["d"] = d;
    j["edges"] = nlohmann::ordered_json::array();
    for (const Edge& e : edges) {
        j["edges"].push_back({{"i", e.i + 1}, {"j", e.j + 1}, {"q", e.weight}});
    }
    j["connected"] = is_connected(d, edges);
    return j.dump(2) + "\n";
}

std::string graph_dot(std::size_t d, const std::vector<Edge>& edges) {
    double qmax = 0.0;
    for (const Edge& e : edges) {
        qmax = std::max(qmax, e.weight);
    }
    const double scale = qmax > 0.0 ? 5.0 / std::log1p(qmax) : 0.0;
    std::ostringstream out;
    out << "graph emtp2 {\n";
    for (std::size_t v = 0; v < d; ++v) {
        out << "  " << v + 1 << ";\n";
    }
    char buf[32];
    for (const Edge& e : edges) {
        std::snprintf(buf, sizeof buf, "%.6g", scale * std::log1p(std::max(e.weight, 0.0)));
        out << "  " << e.i + 1 << " -- " << e.j + 1 << " [penwidth=" << buf << "];\n";
    }
    out << "}\n";
    return out.str();
}

}  // namespace emtp2::cli
