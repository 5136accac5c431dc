#pragma once

// Versioned JSON checkpoints for parallel networks. Doubles survive a
// save/load round trip exactly (the JSON writer emits shortest
// round-trippable representations), which the tests pin down.

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "pnreg/fsio.hpp"
#include "pnreg/pnn.hpp"

namespace pnreg::pnn {

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointFormat = "pnreg-net";

inline nlohmann::json checkpoint_to_json(const ParallelNet& net,
                                         const std::map<std::string, std::string>& meta = {}) {
    net.validate();
    nlohmann::json j;
    j["format"] = kCheckpointFormat;
    j["version"] = kCheckpointVersion;
    j["weight_decay"] = net.weight_decay;
    auto& subs = j["subnets"] = nlohmann::json::array();
    for (const auto& s : net.subnets) {
        nlohmann::json js;
        js["d"] = s.d;
        auto& layers = js["layers"] = nlohmann::json::array();
        for (std::size_t l = 0; l < s.depth(); ++l) {
            nlohmann::json jl;
            jl["rows"] = s.W[l].rows;
            jl["cols"] = s.W[l].cols;
            jl["W"] = s.W[l].data;  // row-major
            jl["b"] = s.b[l];
            layers.push_back(std::move(jl));
        }
        subs.push_back(std::move(js));
    }
    if (!meta.empty()) j["meta"] = meta;
    return j;
}

inline ParallelNet checkpoint_from_json(const nlohmann::json& j,
                                        std::map<std::string, std::string>* meta_out = nullptr) {
    if (!j.is_object() || j.value("format", "") != kCheckpointFormat)
        throw std::invalid_argument("checkpoint: not a pnreg-net file");
    if (j.value("version", -1) != kCheckpointVersion)
        throw std::invalid_argument("checkpoint: unsupported version");
    ParallelNet net;
    net.weight_decay = j.value("weight_decay", 0.0);
    for (const auto& js : j.at("subnets")) {
        Subnetwork s;
        s.d = js.at("d").get<std::size_t>();
        for (const auto& jl : js.at("layers")) {
            Matrix W(jl.at("rows").get<std::size_t>(), jl.at("cols").get<std::size_t>());
            auto flat = jl.at("W").get<std::vector<double>>();
            if (flat.size() != W.rows * W.cols) throw std::invalid_argument("checkpoint: weight shape mismatch");
            W.data = std::move(flat);
            s.W.push_back(std::move(W));
            s.b.push_back(jl.at("b").get<Vector>());
        }
        net.subnets.push_back(std::move(s));
    }
    net.validate();
    if (meta_out && j.contains("meta")) *meta_out = j.at("meta").get<std::map<std::string, std::string>>();
    return net;
}

inline void save_checkpoint(const ParallelNet& net, const std::string& path,
                            const std::map<std::string, std::string>& meta = {}) {
    fsio::atomic_write_file(path, checkpoint_to_json(net, meta).dump(1) + "\n");
}

inline ParallelNet load_checkpoint(const std::string& path,
                                   std::map<std::string, std::string>* meta_out = nullptr) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(fsio::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument("checkpoint: parse error in " + path + ": " + e.what());
    }
    return checkpoint_from_json(j, meta_out);
}

}  // namespace pnreg::pnn
