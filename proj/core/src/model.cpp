#include "fairhead/model.hpp"

#include <cstring>

#include <nlohmann/json.hpp>

#include "io_util.hpp"

namespace fairhead {

namespace fs = std::filesystem;
using nlohmann::json;

MatrixD dense_forward(const DenseLayer& layer, const MatrixD& x) {
    if (x.cols() != layer.in())
        throw Error("shape mismatch: input has " + std::to_string(x.cols()) + " columns, layer expects " +
                    std::to_string(layer.in()));
    MatrixD y(x.rows(), layer.out());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto out = y.row(i);
        for (std::size_t o = 0; o < layer.out(); ++o) out[o] = layer.bias[o];
        auto in = x.row(i);
        for (std::size_t j = 0; j < layer.in(); ++j) {
            const double xj = in[j];
            if (xj == 0.0) continue;
            auto w = layer.weight.row(j);
            for (std::size_t o = 0; o < layer.out(); ++o) out[o] += xj * w[o];
        }
    }
    return y;
}

std::string method_name(Method m) {
    switch (m) {
        case Method::erm: return "erm";
        case Method::fine_tune: return "finetune";
        case Method::dfr: return "dfr";
        case Method::fair_cb: return "fair-cb";
    }
    return "?";
}

std::string method_label(Method m) {
    switch (m) {
        case Method::erm: return "ERM";
        case Method::fine_tune: return "FINE_TUNE";
        case Method::dfr: return "DFR";
        case Method::fair_cb: return "FAIR_CB";
    }
    return "?";
}

Method parse_method(const std::string& name) {
    for (auto m : {Method::erm, Method::fine_tune, Method::dfr, Method::fair_cb})
        if (name == method_name(m) || name == method_label(m)) return m;
    throw Error("unknown method '" + name + "' (expected erm, finetune, dfr or fair-cb)");
}

MatrixD extract_features(const ExtractorModel& m, const MatrixD& x) {
    if (x.cols() != m.input_dim)
        throw Error("shape mismatch: extractor expects " + std::to_string(m.input_dim) + " input columns, got " +
                    std::to_string(x.cols()));
    MatrixD h = x;
    for (const auto& layer : m.layers) {
        h = dense_forward(layer, h);
        for (auto& v : h.data()) v = v > 0.0 ? v : 0.0;
    }
    return h;
}

MatrixD extract_features(const ExtractorModel& m, const MatrixF& x) {
    return extract_features(m, matrix_cast<double>(x));
}

Predictions predict(const HeadModel& h, const MatrixD& features) {
    return Predictions::from_logits(dense_forward(h.layer, features));
}

std::uint64_t parameter_checksum(const ExtractorModel& m) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](std::span<const double> xs) {
        for (double x : xs) {
            unsigned char bytes[sizeof x];
            std::memcpy(bytes, &x, sizeof x);
            for (auto b : bytes) {
                h ^= b;
                h *= 0x100000001b3ULL;
            }
        }
    };
    for (const auto& layer : m.layers) {
        mix(layer.weight.data());
        mix(layer.bias);
    }
    mix(m.head.layer.weight.data());
    mix(m.head.layer.bias);
    return h;
}

namespace {

json meta_to_json(const HeadMetadata& m) {
    return {{"method", method_name(m.method)}, {"seed", m.seed},       {"learning_rate", m.learning_rate},
            {"weight_decay", m.weight_decay},  {"batch_size", m.batch_size}, {"epochs", m.epochs},
            {"alpha", m.alpha}};
}

HeadMetadata meta_from_json(const json& j) {
    HeadMetadata m;
    m.method = parse_method(j.at("method").get<std::string>());
    m.seed = j.at("seed").get<std::uint64_t>();
    m.learning_rate = j.at("learning_rate").get<double>();
    m.weight_decay = j.at("weight_decay").get<double>();
    m.batch_size = j.at("batch_size").get<std::size_t>();
    m.epochs = j.at("epochs").get<std::size_t>();
    m.alpha = j.at("alpha").get<double>();
    return m;
}

struct TensorWriter {
    json list = json::array();
    std::vector<float> payload;

    void add(const std::string& name, std::vector<std::size_t> shape, std::span<const double> values) {
        list.push_back({{"name", name}, {"shape", shape}});
        for (double v : values) payload.push_back(static_cast<float>(v));
    }
    void add_layer(const std::string& prefix, const DenseLayer& l) {
        add(prefix + ".weight", {l.in(), l.out()}, l.weight.data());
        add(prefix + ".bias", {l.out()}, l.bias);
    }
};

struct TensorReader {
    std::vector<float> payload;
    std::size_t offset = 0;
    const json* list = nullptr;
    std::size_t next_tensor = 0;
    std::string source;

    std::vector<double> take(const std::string& name, std::size_t count) {
        if (next_tensor >= list->size()) throw Error(source + ": tensor list ends before '" + name + "'");
        const auto& entry = (*list)[next_tensor++];
        if (entry.at("name").get<std::string>() != name)
            throw Error(source + ": expected tensor '" + name + "', found '" + entry.at("name").get<std::string>() + "'");
        std::size_t expected = 1;
        for (auto s : entry.at("shape").get<std::vector<std::size_t>>()) expected *= s;
        if (expected != count) throw Error(source + ": tensor '" + name + "' has unexpected shape");
        if (offset + count > payload.size()) throw Error("shape mismatch: " + source + " payload is too short");
        std::vector<double> out(payload.begin() + static_cast<std::ptrdiff_t>(offset),
                                payload.begin() + static_cast<std::ptrdiff_t>(offset + count));
        offset += count;
        return out;
    }
    DenseLayer layer(const std::string& prefix, std::size_t in, std::size_t out) {
        DenseLayer l;
        l.weight = MatrixD(in, out, take(prefix + ".weight", in * out));
        l.bias = take(prefix + ".bias", out);
        return l;
    }
    void finish() const {
        if (offset != payload.size()) throw Error("shape mismatch: " + source + " payload has trailing data");
    }
};

void write_model(const fs::path& dir, json manifest, const TensorWriter& w) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create directory " + dir.string() + ": " + ec.message());
    manifest["tensors"] = w.list;
    manifest["payload"] = "params.bin";
    detail::write_file(dir / "model.json", manifest.dump(2) + "\n");
    detail::write_file(dir / "params.bin", detail::encode_f32_le(w.payload));
}

std::pair<json, TensorReader> read_model(const fs::path& dir, const std::string& kind) {
    json manifest;
    try {
        manifest = json::parse(detail::read_file(dir / "model.json"));
    } catch (const json::exception& e) {
        throw Error("malformed model manifest in " + dir.string() + ": " + e.what());
    }
    if (manifest.value("kind", "") != kind)
        throw Error(dir.string() + " does not hold a " + kind + " model (kind = '" + manifest.value("kind", "") + "')");
    TensorReader r;
    r.payload = detail::decode_f32_le(detail::read_file(dir / manifest.value("payload", "params.bin")));
    r.source = dir.string();
    return {std::move(manifest), std::move(r)};
}

}  // namespace

void save_head(const HeadModel& h, const fs::path& dir) {
    TensorWriter w;
    w.add_layer("head", h.layer);
    write_model(dir, {{"kind", "head"}, {"in", h.layer.in()}, {"out", h.layer.out()}, {"meta", meta_to_json(h.meta)}}, w);
}

HeadModel load_head(const fs::path& dir) {
    auto [manifest, reader] = read_model(dir, "head");
    try {
        reader.list = &manifest.at("tensors");
        HeadModel h;
        h.layer = reader.layer("head", manifest.at("in").get<std::size_t>(), manifest.at("out").get<std::size_t>());
        h.meta = meta_from_json(manifest.at("meta"));
        reader.finish();
        return h;
    } catch (const json::exception& e) {
        throw Error("model manifest in " + dir.string() + " is missing a field: " + e.what());
    }
}

void save_extractor(const ExtractorModel& m, const fs::path& dir) {
    TensorWriter w;
    std::vector<std::size_t> widths;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        w.add_layer("layer" + std::to_string(l), m.layers[l]);
        widths.push_back(m.layers[l].out());
    }
    w.add_layer("head", m.head.layer);
    write_model(dir,
                {{"kind", "extractor"},
                 {"input_dim", m.input_dim},
                 {"layer_widths", widths},
                 {"classes", m.head.layer.out()},
                 {"head_meta", meta_to_json(m.head.meta)}},
                w);
}

ExtractorModel load_extractor(const fs::path& dir) {
    auto [manifest, reader] = read_model(dir, "extractor");
    try {
        reader.list = &manifest.at("tensors");
        ExtractorModel m;
        m.input_dim = manifest.at("input_dim").get<std::size_t>();
        std::size_t in = m.input_dim;
        const auto widths = manifest.at("layer_widths").get<std::vector<std::size_t>>();
        for (std::size_t l = 0; l < widths.size(); ++l) {
            m.layers.push_back(reader.layer("layer" + std::to_string(l), in, widths[l]));
            in = widths[l];
        }
        m.head.layer = reader.layer("head", in, manifest.at("classes").get<std::size_t>());
        m.head.meta = meta_from_json(manifest.at("head_meta"));
        reader.finish();
        return m;
    } catch (const json::exception& e) {
        throw Error("model manifest in " + dir.string() + " is missing a field: " + e.what());
    }
}

}  // namespace fairhead
