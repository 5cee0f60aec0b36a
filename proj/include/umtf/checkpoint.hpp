#pragma once
// Model checkpoints: a versioned JSON parameter dump with a shape manifest.
// Doubles round-trip exactly, so a reloaded model reproduces identical
// forward outputs.

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "umtf/graph.hpp"
#include "umtf/visual.hpp"

namespace umtf {

namespace detail {

using cjson = nlohmann::ordered_json;

inline cjson tensor_to_json(const Eigen::MatrixXd& m) {
    cjson t;
    t["shape"] = {m.rows(), m.cols()};
    std::vector<double> data(m.data(), m.data() + m.size());
    t["data"] = std::move(data);
    return t;
}

inline cjson tensor_to_json(const Eigen::VectorXd& v) {
    cjson t;
    t["shape"] = {v.size()};
    std::vector<double> data(v.data(), v.data() + v.size());
    t["data"] = std::move(data);
    return t;
}

inline Eigen::MatrixXd matrix_from_json(const cjson& t, const std::string& name) {
    const auto shape = t.at("shape").get<std::vector<Eigen::Index>>();
    const auto data = t.at("data").get<std::vector<double>>();
    if (shape.size() != 2 || static_cast<Eigen::Index>(data.size()) != shape[0] * shape[1])
        throw ParseError("checkpoint: tensor '" + name + "' shape/data mismatch");
    Eigen::MatrixXd m(shape[0], shape[1]);
    std::copy(data.begin(), data.end(), m.data());
    return m;
}

inline Eigen::VectorXd vector_from_json(const cjson& t, const std::string& name) {
    const auto shape = t.at("shape").get<std::vector<Eigen::Index>>();
    const auto data = t.at("data").get<std::vector<double>>();
    if (shape.size() != 1 || static_cast<Eigen::Index>(data.size()) != shape[0])
        throw ParseError("checkpoint: tensor '" + name + "' shape/data mismatch");
    Eigen::VectorXd v(shape[0]);
    std::copy(data.begin(), data.end(), v.data());
    return v;
}

inline void write_checkpoint(const cjson& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path);
    out << j.dump(1) << '\n';
    if (!out) throw Error("write failed: " + path);
}

inline cjson read_checkpoint(const std::string& path, const std::string& expected_kind) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open for reading: " + path);
    cjson j;
    try {
        j = cjson::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("checkpoint " + path + ": " + e.what());
    }
    if (j.value("format_version", 0) != 1)
        throw ParseError("checkpoint " + path + ": unsupported format_version");
    if (j.value("kind", "") != expected_kind)
        throw ParseError("checkpoint " + path + ": expected kind '" + expected_kind + "'");
    return j;
}

} // namespace detail

inline void save_visual_checkpoint(const VisualModel& m, const std::string& path) {
    detail::cjson j;
    j["format_version"] = 1;
    j["kind"] = "visual";
    j["config"] = {{"d_raw", m.cfg.d_raw}, {"d_mid", m.cfg.d_mid}, {"d_feat", m.cfg.d_feat}};
    detail::cjson t;
    t["w1"] = detail::tensor_to_json(m.w1);
    t["b1"] = detail::tensor_to_json(m.b1);
    t["w2"] = detail::tensor_to_json(m.w2);
    t["b2"] = detail::tensor_to_json(m.b2);
    for (std::size_t c = 0; c < m.cls_w.size(); ++c) {
        t["cls_w" + std::to_string(c)] = detail::tensor_to_json(m.cls_w[c]);
        t["cls_b" + std::to_string(c)] = detail::tensor_to_json(m.cls_b[c]);
    }
    j["n_classifiers"] = m.cls_w.size();
    j["tensors"] = std::move(t);
    detail::write_checkpoint(j, path);
}

inline VisualModel load_visual_checkpoint(const std::string& path) {
    const auto j = detail::read_checkpoint(path, "visual");
    VisualModel m;
    m.cfg.d_raw = j.at("config").at("d_raw").get<int>();
    m.cfg.d_mid = j.at("config").at("d_mid").get<int>();
    m.cfg.d_feat = j.at("config").at("d_feat").get<int>();
    const auto& t = j.at("tensors");
    m.w1 = detail::matrix_from_json(t.at("w1"), "w1");
    m.b1 = detail::vector_from_json(t.at("b1"), "b1");
    m.w2 = detail::matrix_from_json(t.at("w2"), "w2");
    m.b2 = detail::vector_from_json(t.at("b2"), "b2");
    const auto n_cls = j.value("n_classifiers", std::size_t{0});
    for (std::size_t c = 0; c < n_cls; ++c) {
        m.cls_w.push_back(detail::matrix_from_json(t.at("cls_w" + std::to_string(c)), "cls_w"));
        m.cls_b.push_back(detail::vector_from_json(t.at("cls_b" + std::to_string(c)), "cls_b"));
    }
    return m;
}

namespace detail {

inline void head_to_json(cjson& t, const MgmHead& h, const std::string& prefix) {
    t[prefix + ".edge.w1"] = tensor_to_json(h.edge.w1);
    t[prefix + ".edge.b1"] = tensor_to_json(h.edge.b1);
    t[prefix + ".edge.g1"] = tensor_to_json(h.edge.g1);
    t[prefix + ".edge.be1"] = tensor_to_json(h.edge.be1);
    t[prefix + ".edge.w2"] = tensor_to_json(h.edge.w2);
    t[prefix + ".edge.b2"] = tensor_to_json(h.edge.b2);
    t[prefix + ".edge.g2"] = tensor_to_json(h.edge.g2);
    t[prefix + ".edge.be2"] = tensor_to_json(h.edge.be2);
    t[prefix + ".node_w"] = tensor_to_json(h.node_w);
    t[prefix + ".node_b"] = tensor_to_json(h.node_b);
    if (h.out_gamma.size() > 0) {
        t[prefix + ".out_gamma"] = tensor_to_json(h.out_gamma);
        t[prefix + ".out_beta"] = tensor_to_json(h.out_beta);
    }
}

inline MgmHead head_from_json(const cjson& t, const std::string& prefix, bool with_norm) {
    MgmHead h;
    h.edge.w1 = matrix_from_json(t.at(prefix + ".edge.w1"), prefix);
    h.edge.b1 = vector_from_json(t.at(prefix + ".edge.b1"), prefix);
    h.edge.g1 = vector_from_json(t.at(prefix + ".edge.g1"), prefix);
    h.edge.be1 = vector_from_json(t.at(prefix + ".edge.be1"), prefix);
    h.edge.w2 = matrix_from_json(t.at(prefix + ".edge.w2"), prefix);
    h.edge.b2 = vector_from_json(t.at(prefix + ".edge.b2"), prefix);
    h.edge.g2 = vector_from_json(t.at(prefix + ".edge.g2"), prefix);
    h.edge.be2 = vector_from_json(t.at(prefix + ".edge.be2"), prefix);
    h.node_w = matrix_from_json(t.at(prefix + ".node_w"), prefix);
    h.node_b = vector_from_json(t.at(prefix + ".node_b"), prefix);
    if (with_norm) {
        h.out_gamma = vector_from_json(t.at(prefix + ".out_gamma"), prefix);
        h.out_beta = vector_from_json(t.at(prefix + ".out_beta"), prefix);
    }
    return h;
}

} // namespace detail

inline void save_mmgn_checkpoint(const MmgnModel& m, const std::string& path) {
    detail::cjson j;
    j["format_version"] = 1;
    j["kind"] = "mmgn";
    j["config"] = {{"heads", m.cfg.heads},   {"bins", m.cfg.bins},
                   {"d_in", m.cfg.d_in},     {"d_hid", m.cfg.d_hid},
                   {"edge_hidden", m.cfg.edge_hidden}, {"leaky_slope", m.cfg.leaky_slope},
                   {"bn_eps", m.cfg.bn_eps}, {"n_classes", m.n_classes}};
    detail::cjson t;
    for (std::size_t h = 0; h < m.heads.size(); ++h)
        detail::head_to_json(t, m.heads[h], "head" + std::to_string(h));
    detail::head_to_json(t, m.classifier, "classifier");
    j["tensors"] = std::move(t);
    detail::write_checkpoint(j, path);
}

inline MmgnModel load_mmgn_checkpoint(const std::string& path) {
    const auto j = detail::read_checkpoint(path, "mmgn");
    MmgnModel m;
    const auto& c = j.at("config");
    m.cfg.heads = c.at("heads").get<int>();
    m.cfg.bins = c.at("bins").get<int>();
    m.cfg.d_in = c.at("d_in").get<int>();
    m.cfg.d_hid = c.at("d_hid").get<int>();
    m.cfg.edge_hidden = c.at("edge_hidden").get<int>();
    m.cfg.leaky_slope = c.at("leaky_slope").get<double>();
    m.cfg.bn_eps = c.at("bn_eps").get<double>();
    m.n_classes = c.at("n_classes").get<int>();
    const auto& t = j.at("tensors");
    for (int h = 0; h < m.cfg.heads; ++h)
        m.heads.push_back(detail::head_from_json(t, "head" + std::to_string(h), true));
    m.classifier = detail::head_from_json(t, "classifier", false);
    return m;
}

} // namespace umtf
