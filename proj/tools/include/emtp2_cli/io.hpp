#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "emtp2/errors.hpp"
#include "emtp2/solver.hpp"

namespace emtp2::cli {

/// Malformed file or command line (exit code 4).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Headerless comma-separated matrix; blank lines are skipped and every row
/// must have the same number of fields.
Eigen::MatrixXd read_matrix_csv(std::istream& in);
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);

/// Writes every entry with 17 significant digits.
void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m);
void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m);

/// Reads a variogram file. Asymmetry above 1e-12 relative is symmetrized and
/// reported through `warning` (left empty otherwise).
Variogram read_variogram(const std::filesystem::path& path, std::string* warning = nullptr);

/// {"d": int, "edges": [{"i": int, "j": int, "q": float}], "connected": bool}
/// with one-based node indices.
std::string graph_json(std::size_t d, const std::vector<Edge>& edges);

/// Undirected DOT graph; penwidth proportional to log(1 + q).
std::string graph_dot(std::size_t d, const std::vector<Edge>& edges);

}  // namespace emtp2::cli
