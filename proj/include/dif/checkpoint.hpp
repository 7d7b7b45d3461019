#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "dif/errors.hpp"
#include "dif/model.hpp"

namespace dif {

// ---------------------------------------------------------------------------
// base64 (standard alphabet, padded)

namespace detail {

inline const char* b64_alphabet() {
    return "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

inline std::string b64_encode(const unsigned char* data, std::size_t len) {
    const char* tab = b64_alphabet();
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    for (std::size_t i = 0; i < len; i += 3) {
        std::uint32_t v = data[i] << 16;
        if (i + 1 < len) v |= data[i + 1] << 8;
        if (i + 2 < len) v |= data[i + 2];
        out.push_back(tab[(v >> 18) & 63]);
        out.push_back(tab[(v >> 12) & 63]);
        out.push_back(i + 1 < len ? tab[(v >> 6) & 63] : '=');
        out.push_back(i + 2 < len ? tab[v & 63] : '=');
    }
    return out;
}

inline std::vector<unsigned char> b64_decode(const std::string& s) {
    auto val = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        if (c == '=') return -1;
        throw ParseError("base64: invalid character");
    };
    if (s.size() % 4 != 0) throw ParseError("base64: length not a multiple of 4");
    std::vector<unsigned char> out;
    out.reserve(s.size() / 4 * 3);
    for (std::size_t i = 0; i < s.size(); i += 4) {
        int a = val(s[i]), b = val(s[i + 1]), c = val(s[i + 2]), d = val(s[i + 3]);
        if (a < 0 || b < 0) throw ParseError("base64: malformed padding");
        std::uint32_t v = (a << 18) | (b << 12) | (std::max(c, 0) << 6) | std::max(d, 0);
        out.push_back((v >> 16) & 0xff);
        if (c >= 0) out.push_back((v >> 8) & 0xff);
        if (d >= 0) out.push_back(v & 0xff);
    }
    return out;
}

// Little-endian f64 <-> base64. x86-64 only; enforced at compile time.
static_assert(std::endian::native == std::endian::little, "little-endian host required");

inline std::string doubles_to_b64(const std::vector<double>& v) {
    return b64_encode(reinterpret_cast<const unsigned char*>(v.data()), v.size() * sizeof(double));
}

inline std::vector<double> b64_to_doubles(const std::string& s, std::size_t expected) {
    std::vector<unsigned char> bytes = b64_decode(s);
    if (bytes.size() != expected * sizeof(double))
        throw ParseError("checkpoint: weight blob size mismatch");
    std::vector<double> v(expected);
    std::memcpy(v.data(), bytes.data(), bytes.size());
    return v;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Checkpoint schema

inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
    TrainedModel model;
    std::map<std::string, AdamState> optimizer; // keys: predictor/rectifier/baseline
    std::uint64_t rng_seed = 0;
    int epoch = 0;
};

namespace detail {

inline nlohmann::json net_to_json(const Mlp& m) {
    nlohmann::json j;
    j["dims"] = m.dims();
    std::vector<std::string> acts;
    for (const auto& l : m.layers) acts.push_back(activation_name(l.act));
    j["activations"] = acts;
    j["weights"] = doubles_to_b64(flatten_params(m));
    return j;
}

inline Mlp net_from_json(const nlohmann::json& j) {
    std::vector<int> dims = j.at("dims").get<std::vector<int>>();
    std::vector<std::string> acts = j.at("activations").get<std::vector<std::string>>();
    std::vector<Activation> a;
    for (const auto& s : acts) a.push_back(activation_from_name(s));
    Rng rng(0);
    Mlp m = Mlp::make(dims, a, rng);
    assign_params(m, b64_to_doubles(j.at("weights").get<std::string>(), m.param_count()));
    return m;
}

inline std::vector<double> flatten_grads(const MlpGrads& g) {
    std::vector<double> flat;
    for (std::size_t l = 0; l < g.dw.size(); ++l) {
        flat.insert(flat.end(), g.dw[l].begin(), g.dw[l].end());
        flat.insert(flat.end(), g.db[l].begin(), g.db[l].end());
    }
    return flat;
}

inline void assign_grads(MlpGrads& g, const std::vector<double>& flat) {
    std::size_t k = 0;
    for (std::size_t l = 0; l < g.dw.size(); ++l) {
        std::copy(flat.begin() + k, flat.begin() + k + g.dw[l].size(), g.dw[l].begin());
        k += g.dw[l].size();
        std::copy(flat.begin() + k, flat.begin() + k + g.db[l].size(), g.db[l].begin());
        k += g.db[l].size();
    }
    if (k != flat.size()) throw ParseError("checkpoint: optimizer blob size mismatch");
}

inline nlohmann::json opt_to_json(const AdamState& s) {
    nlohmann::json j;
    j["step"] = s.step;
    j["lr"] = s.hp.lr;
    j["beta1"] = s.hp.beta1;
    j["beta2"] = s.hp.beta2;
    j["eps"] = s.hp.eps;
    j["m"] = doubles_to_b64(flatten_grads(s.m));
    j["v"] = doubles_to_b64(flatten_grads(s.v));
    return j;
}

inline AdamState opt_from_json(const nlohmann::json& j, const Mlp& net) {
    AdamState s = AdamState::init(net);
    s.step = j.at("step").get<std::int64_t>();
    s.hp.lr = j.at("lr").get<double>();
    s.hp.beta1 = j.at("beta1").get<double>();
    s.hp.beta2 = j.at("beta2").get<double>();
    s.hp.eps = j.at("eps").get<double>();
    std::size_t n = net.param_count();
    assign_grads(s.m, b64_to_doubles(j.at("m").get<std::string>(), n));
    assign_grads(s.v, b64_to_doubles(j.at("v").get<std::string>(), n));
    return s;
}

} // namespace detail

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    nlohmann::json j;
    j["format_version"] = kCheckpointFormatVersion;
    j["mode"] = train_mode_name(ck.model.mode);
    j["alpha"] = ck.model.dif.occ.alpha;
    j["k"] = ck.model.dif.design.k;
    j["beta"] = ck.model.dif.design.beta;
    j["feature_noise_sd"] = ck.model.dif.feature_noise_sd;
    j["rng_seed"] = ck.rng_seed;
    j["epoch"] = ck.epoch;
    nlohmann::json nets, opts;
    if (ck.model.mode == TrainMode::Baseline) {
        nets["baseline"] = detail::net_to_json(ck.model.baseline);
    } else {
        nets["predictor"] = detail::net_to_json(ck.model.dif.predictor);
        if (ck.model.mode == TrainMode::Dif)
            nets["rectifier"] = detail::net_to_json(ck.model.dif.rectifier);
    }
    for (const auto& [name, st] : ck.optimizer) opts[name] = detail::opt_to_json(st);
    j["nets"] = nets;
    j["optimizer"] = opts;

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << j.dump(2) << "\n";
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("checkpoint: invalid JSON: ") + e.what());
    }
    try {
        if (j.at("format_version").get<int>() != kCheckpointFormatVersion)
            throw ParseError("checkpoint: unsupported format_version");
        Checkpoint ck;
        ck.model.mode = train_mode_from_name(j.at("mode").get<std::string>());
        ck.model.dif.occ.alpha = j.at("alpha").get<double>();
        ck.model.dif.design.k = j.at("k").get<double>();
        ck.model.dif.design.beta = j.at("beta").get<double>();
        ck.model.dif.feature_noise_sd = j.at("feature_noise_sd").get<double>();
        ck.rng_seed = j.at("rng_seed").get<std::uint64_t>();
        ck.epoch = j.at("epoch").get<int>();
        const auto& nets = j.at("nets");
        if (ck.model.mode == TrainMode::Baseline) {
            ck.model.baseline = detail::net_from_json(nets.at("baseline"));
        } else {
            ck.model.dif.predictor = detail::net_from_json(nets.at("predictor"));
            if (ck.model.mode == TrainMode::Dif)
                ck.model.dif.rectifier = detail::net_from_json(nets.at("rectifier"));
        }
        if (j.contains("optimizer")) {
            for (const auto& [name, jo] : j.at("optimizer").items()) {
                const Mlp* net = nullptr;
                if (name == "predictor") net = &ck.model.dif.predictor;
                else if (name == "rectifier") net = &ck.model.dif.rectifier;
                else if (name == "baseline") net = &ck.model.baseline;
                if (!net || net->layers.empty()) continue;
                ck.optimizer.emplace(name, detail::opt_from_json(jo, *net));
            }
        }
        return ck;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("checkpoint: missing or invalid field: ") + e.what());
    }
}

} // namespace dif
