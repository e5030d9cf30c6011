#include "bnnprobe/checkpoint.hpp"

#include <fstream>

#include "json.hpp"

#include "bnnprobe/error.hpp"

namespace bnnprobe {

void save_checkpoint(const Network& net, std::uint64_t seed, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["version"] = checkpoint_version;
    j["quant_mode"] = to_string(net.mode());
    j["seed"] = seed;
    j["layers"] = nlohmann::ordered_json::array();
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        const LayerSpec& s = net.layers()[l];
        const LayerParams& p = net.params()[l];
        nlohmann::ordered_json layer;
        layer["kind"] = "dense";
        layer["in_dim"] = s.in_dim;
        layer["out_dim"] = s.out_dim;
        layer["activation"] = to_string(s.activation);
        layer["quantize_weights"] = s.quantize_weights;
        layer["quantize_activation"] = s.quantize_activation;
        layer["weight"] = p.weight.to_vector();
        layer["bias"] = p.bias.to_vector();
        j["layers"].push_back(std::move(layer));
    }
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write checkpoint " + path.string());
    out << j.dump(1) << '\n';
    if (!out) throw ConfigError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open checkpoint " + path.string());
    try {
        const nlohmann::json j = nlohmann::json::parse(in);
        if (j.at("version").get<int>() != checkpoint_version) {
            throw ConfigError("unsupported checkpoint version in " + path.string());
        }
        std::vector<LayerSpec> specs;
        std::vector<LayerParams> params;
        for (const auto& layer : j.at("layers")) {
            if (layer.at("kind").get<std::string>() != "dense") {
                throw ConfigError("unsupported layer kind in " + path.string());
            }
            LayerSpec s;
            s.in_dim = layer.at("in_dim").get<std::size_t>();
            s.out_dim = layer.at("out_dim").get<std::size_t>();
            s.activation = parse_activation(layer.at("activation").get<std::string>());
            s.quantize_weights = layer.at("quantize_weights").get<bool>();
            s.quantize_activation = layer.at("quantize_activation").get<bool>();
            specs.push_back(s);
            params.push_back({Tensor::matrix(s.out_dim, s.in_dim,
                                             layer.at("weight").get<std::vector<double>>()),
                              Tensor::vector(layer.at("bias").get<std::vector<double>>())});
        }
        Network net(std::move(specs), std::move(params),
                    parse_quant_mode(j.at("quant_mode").get<std::string>()));
        return {std::move(net), j.at("seed").get<std::uint64_t>()};
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed checkpoint " + path.string() + ": " + e.what());
    }
}

}  // namespace bnnprobe
