#include "invprop/io.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <sstream>

namespace invprop {

nlohmann::json readJsonFile(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorKind::Parse, fmt::format("cannot open {}", path));
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorKind::Parse, fmt::format("{}: {}", path, e.what()));
    }
}

void writeTextFile(const std::string &path, const std::string &text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorKind::Parse, fmt::format("cannot write {}", path));
    out << text;
}

Vector vectorFromJson(const nlohmann::json &j, const std::string &what)
{
    if (!j.is_array())
        throw Error(ErrorKind::Parse, fmt::format("{} must be an array of numbers", what));
    Vector v(static_cast<Index>(j.size()));
    for (std::size_t k = 0; k < j.size(); ++k) {
        if (!j[k].is_number())
            throw Error(ErrorKind::Parse, fmt::format("{} entry {} is not a number", what, k));
        v[static_cast<Index>(k)] = j[k].get<double>();
        if (!std::isfinite(v[static_cast<Index>(k)]))
            throw Error(ErrorKind::NonFinite, fmt::format("{} entry {} is not finite", what, k));
    }
    return v;
}

Matrix matrixFromJson(const nlohmann::json &j, const std::string &what)
{
    if (!j.is_array() || j.empty())
        throw Error(ErrorKind::Parse, fmt::format("{} must be a non-empty array of rows", what));
    const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
    Matrix m(static_cast<Index>(j.size()), static_cast<Index>(cols));
    for (std::size_t r = 0; r < j.size(); ++r) {
        const Vector row = vectorFromJson(j[r], fmt::format("{} row {}", what, r));
        if (static_cast<std::size_t>(row.size()) != cols)
            throw Error(ErrorKind::Dimension, fmt::format("{} row {} has {} entries, expected {}", what, r, row.size(), cols));
        m.row(static_cast<Index>(r)) = row.transpose();
    }
    return m;
}

nlohmann::json toJson(const Vector &v)
{
    auto j = nlohmann::json::array();
    for (Index k = 0; k < v.size(); ++k)
        j.push_back(v[k]);
    return j;
}

nlohmann::json toJson(const Matrix &m)
{
    auto j = nlohmann::json::array();
    for (Index r = 0; r < m.rows(); ++r)
        j.push_back(toJson(Vector(m.row(r).transpose())));
    return j;
}

Network networkFromJson(const nlohmann::json &j)
{
    if (!j.is_object() || !j.contains("layers") || !j["layers"].is_array() || j["layers"].empty())
        throw Error(ErrorKind::Parse, "network needs a non-empty \"layers\" array");
    std::vector<AffineLayer> layers;
    const auto &arr = j["layers"];
    for (std::size_t k = 0; k < arr.size(); ++k) {
        const auto &l = arr[k];
        if (!l.is_object() || !l.contains("weights") || !l.contains("bias"))
            throw Error(ErrorKind::Parse, fmt::format("layer {} needs \"weights\" and \"bias\"", k));
        Matrix w = matrixFromJson(l["weights"], fmt::format("layer {} weights", k));
        Vector b = vectorFromJson(l["bias"], fmt::format("layer {} bias", k));
        if (b.size() != w.rows())
            throw Error(ErrorKind::Dimension,
                        fmt::format("layer {}: bias length {} does not match {} weight rows", k, b.size(), w.rows()));
        if (k > 0 && w.cols() != layers.back().outDim())
            throw Error(ErrorKind::Dimension,
                        fmt::format("layer {} expects {} inputs but layer {} produces {}", k, w.cols(), k - 1,
                                    layers.back().outDim()));
        layers.emplace_back(std::move(w), std::move(b));
    }
    return Network(std::move(layers));
}

nlohmann::json toJson(const Network &net)
{
    auto layers = nlohmann::json::array();
    for (const auto &l : net.layers())
        layers.push_back({{"weights", toJson(l.weights)}, {"bias", toJson(l.bias)}});
    return {{"layers", layers}};
}

OutputSet outputSetFromJson(const nlohmann::json &j)
{
    if (!j.is_object() || !j.contains("H") || !j.contains("d"))
        throw Error(ErrorKind::Parse, "output set needs \"H\" and \"d\"");
    return OutputSet(matrixFromJson(j["H"], "H"), vectorFromJson(j["d"], "d"));
}

nlohmann::json toJson(const OutputSet &s)
{
    return {{"H", toJson(s.H)}, {"d", toJson(s.d)}};
}

InputBox boxFromJson(const nlohmann::json &j)
{
    if (!j.is_object() || !j.contains("lo") || !j.contains("hi"))
        throw Error(ErrorKind::Parse, "box needs \"lo\" and \"hi\"");
    Vector lo = vectorFromJson(j["lo"], "box lo");
    Vector hi = vectorFromJson(j["hi"], "box hi");
    if (lo.size() != hi.size())
        throw Error(ErrorKind::Dimension, "box lo and hi differ in length");
    return InputBox(std::move(lo), std::move(hi));
}

nlohmann::json toJson(const InputBox &box)
{
    return {{"lo", toJson(box.lo)}, {"hi", toJson(box.hi)}};
}

nlohmann::json toJson(const HalfSpace &h)
{
    return {{"c", toJson(h.c)}, {"lb", h.lb}};
}

HalfSpace halfSpaceFromJson(const nlohmann::json &j)
{
    if (!j.is_object() || !j.contains("c") || !j.contains("lb") || !j["lb"].is_number())
        throw Error(ErrorKind::Parse, "half-space needs \"c\" and numeric \"lb\"");
    return {vectorFromJson(j["c"], "half-space c"), j["lb"].get<double>()};
}

Dynamics dynamicsFromJson(const nlohmann::json &j)
{
    if (!j.is_object() || !j.contains("A") || !j.contains("B"))
        throw Error(ErrorKind::Parse, "dynamics need \"A\" and \"B\"");
    Dynamics d{matrixFromJson(j["A"], "A"), matrixFromJson(j["B"], "B")};
    if (d.A.rows() != d.A.cols())
        throw Error(ErrorKind::Dimension, "A must be square");
    if (d.B.rows() != d.A.rows())
        throw Error(ErrorKind::Dimension, "B must have as many rows as A");
    return d;
}

Network loadNetwork(const std::string &path)
{
    return networkFromJson(readJsonFile(path));
}

OutputSet loadOutputSet(const std::string &path)
{
    return outputSetFromJson(readJsonFile(path));
}

InputBox loadBox(const std::string &path)
{
    return boxFromJson(readJsonFile(path));
}

OptimizerConfig loadConfig(const std::string &path)
{
    return configFromJson(readJsonFile(path));
}

Dynamics loadDynamics(const std::string &path)
{
    return dynamicsFromJson(readJsonFile(path));
}

} // namespace invprop
