#pragma once

#include "invprop/geometry.hpp"
#include "invprop/solver.hpp"

#include <nlohmann/json.hpp>

#include <string>

namespace invprop {

// Parse failures and malformed content raise Error(ErrorKind::Parse), with the
// offending layer named where there is one.

nlohmann::json readJsonFile(const std::string &path);
void writeTextFile(const std::string &path, const std::string &text);

Matrix matrixFromJson(const nlohmann::json &j, const std::string &what);
Vector vectorFromJson(const nlohmann::json &j, const std::string &what);
nlohmann::json toJson(const Matrix &m);
nlohmann::json toJson(const Vector &v);

Network networkFromJson(const nlohmann::json &j);
nlohmann::json toJson(const Network &net);
OutputSet outputSetFromJson(const nlohmann::json &j);
nlohmann::json toJson(const OutputSet &s);
InputBox boxFromJson(const nlohmann::json &j);
nlohmann::json toJson(const InputBox &box);
nlohmann::json toJson(const HalfSpace &h);
HalfSpace halfSpaceFromJson(const nlohmann::json &j);

struct Dynamics
{
    Matrix A;
    Matrix B;
};

Dynamics dynamicsFromJson(const nlohmann::json &j);

Network loadNetwork(const std::string &path);
OutputSet loadOutputSet(const std::string &path);
InputBox loadBox(const std::string &path);
OptimizerConfig loadConfig(const std::string &path);
Dynamics loadDynamics(const std::string &path);

} // namespace invprop
