#include "sketchinpaint/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "sketchinpaint/errors.hpp"

namespace sketchinpaint {

namespace {

constexpr char kMagic[8] = {'S', 'K', 'I', 'N', 'P', 'C', 'K', 'P'};

nlohmann::ordered_json config_to_json(const ModelConfig& c) {
    nlohmann::ordered_json j;
    j["latent_channels"] = c.unet.latent_channels;
    j["latent_size"] = c.unet.latent_size;
    j["base_width"] = c.unet.base_width;
    j["channel_multipliers"] = c.unet.channel_multipliers;
    j["attention_scales"] = c.unet.attention_scales;
    j["text_embed_dim"] = c.unet.text_embed_dim;
    j["groupnorm_groups"] = c.unet.groupnorm_groups;
    j["text_vocab_seed"] = c.text.vocab_seed;
    j["text_max_tokens"] = c.text.max_tokens;
    j["text_embed_dim_embedder"] = c.text.embed_dim;
    j["vae_mode"] = vae_mode_name(c.vae_mode);
    j["vae_factor"] = c.vae_factor;
    j["image_channels"] = c.image_channels;
    j["init_seed"] = c.init_seed;
    return j;
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.unet.latent_channels = j.at("latent_channels").get<int>();
    c.unet.latent_size = j.at("latent_size").get<int>();
    c.unet.base_width = j.at("base_width").get<int>();
    c.unet.channel_multipliers = j.at("channel_multipliers").get<std::array<int, kNumScales>>();
    c.unet.attention_scales = j.at("attention_scales").get<std::vector<int>>();
    c.unet.text_embed_dim = j.at("text_embed_dim").get<int>();
    c.unet.groupnorm_groups = j.at("groupnorm_groups").get<int>();
    c.text.vocab_seed = j.at("text_vocab_seed").get<std::uint64_t>();
    c.text.max_tokens = j.at("text_max_tokens").get<int>();
    c.text.embed_dim = j.at("text_embed_dim_embedder").get<int>();
    c.vae_mode = parse_vae_mode(j.at("vae_mode").get<std::string>());
    c.vae_factor = j.at("vae_factor").get<int>();
    c.image_channels = j.at("image_channels").get<int>();
    c.init_seed = j.at("init_seed").get<std::uint64_t>();
    return c;
}

template <typename T>
void put(std::string& buf, T v) {
    buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

class Reader {
public:
    Reader(const std::string& data, std::size_t end, const std::string& path) : data_(data), end_(end), path_(path) {}
    template <typename T>
    T get() {
        T v;
        need(sizeof(T));
        std::memcpy(&v, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    void read_doubles(double* out, std::size_t n) {
        need(n * sizeof(double));
        std::memcpy(out, data_.data() + pos_, n * sizeof(double));
        pos_ += n * sizeof(double);
    }
    bool done() const { return pos_ == end_; }

private:
    void need(std::size_t n) const {
        if (pos_ + n > end_) {
            throw IntegrityError("checkpoint " + path_ + " is truncated");
        }
    }
    const std::string& data_;
    std::size_t end_;
    const std::string& path_;
    std::size_t pos_ = 0;
};

std::uint32_t crc_of(const std::string& data, std::size_t n) {
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(n));
    return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::string model_config_json(const ModelConfig& config) {
    return config_to_json(config).dump();
}

ModelConfig model_config_from_json(const std::string& json) {
    return config_from_json(nlohmann::json::parse(json));
}

std::string first_config_mismatch(const ModelConfig& a, const ModelConfig& b) {
    const auto ja = config_to_json(a);
    const auto jb = config_to_json(b);
    for (auto it = ja.begin(); it != ja.end(); ++it) {
        if (*it != jb.at(it.key())) {
            return it.key();
        }
    }
    return "";
}

void save_checkpoint(const std::string& path, const SketchInpaintModel& model, const CheckpointMeta& meta) {
    nlohmann::ordered_json header;
    header["model"] = config_to_json(model.config());
    header["step"] = meta.step;
    header["rng_state"] = meta.rng_state;
    header["config_snapshot"] = meta.config_snapshot;
    const std::string head = header.dump();

    std::string buf(kMagic, sizeof(kMagic));
    put<std::uint32_t>(buf, kCheckpointVersion);
    put<std::uint64_t>(buf, head.size());
    buf += head;
    const auto& params = model.parameters().all();
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(params.size()));
    for (const Parameter& p : params) {
        put<std::uint32_t>(buf, static_cast<std::uint32_t>(p.name.size()));
        buf += p.name;
        put<std::uint8_t>(buf, p.group == ParamGroup::frozen ? 0 : 1);
        const Grid& v = p.var.value();
        for (int d : v.shape()) {
            put<std::int32_t>(buf, d);
        }
        buf.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
    }
    put<std::uint32_t>(buf, crc_of(buf, buf.size()));

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (!out) {
            throw Error("save_checkpoint: cannot write " + tmp);
        }
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw Error("save_checkpoint: cannot move " + tmp + " to " + path);
    }
}

LoadedCheckpoint load_checkpoint(const std::string& path, const std::optional<ModelConfig>& expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IngestionError(path, 0, "cannot open checkpoint");
    }
    const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (data.size() < sizeof(kMagic) + 4 + 8 + 4 + 4) {
        throw IntegrityError("checkpoint " + path + " is truncated");
    }
    if (std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0) {
        throw IntegrityError("checkpoint " + path + " has a bad magic number");
    }
    const std::size_t body = data.size() - 4;
    std::uint32_t stored_crc;
    std::memcpy(&stored_crc, data.data() + body, 4);
    if (stored_crc != crc_of(data, body)) {
        throw IntegrityError("checkpoint " + path + " failed its checksum (truncated or corrupt)");
    }

    Reader r(data, body, path);
    r.bytes(sizeof(kMagic));
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion) {
        throw VersionError("format_version", "checkpoint has version " + std::to_string(version) + ", expected " +
                                                 std::to_string(kCheckpointVersion));
    }
    const auto head_len = r.get<std::uint64_t>();
    nlohmann::json header;
    LoadedCheckpoint out;
    try {
        header = nlohmann::json::parse(r.bytes(head_len));
        out.config = config_from_json(header.at("model"));
        out.meta.step = header.at("step").get<std::int64_t>();
        out.meta.rng_state = header.at("rng_state").get<std::string>();
        out.meta.config_snapshot = header.at("config_snapshot").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw VersionError("header", std::string("unreadable checkpoint header: ") + e.what());
    }
    if (expected) {
        const std::string field = first_config_mismatch(*expected, out.config);
        if (!field.empty()) {
            throw VersionError(field, "checkpoint " + path + " was written for a different model configuration");
        }
    }

    auto model = std::make_unique<SketchInpaintModel>(out.config);
    auto& params = model->parameters();
    const auto count = r.get<std::uint32_t>();
    if (count != params.all().size()) {
        throw VersionError("parameters", "checkpoint holds " + std::to_string(count) + " parameters, model has " +
                                             std::to_string(params.all().size()));
    }
    for (std::uint32_t k = 0; k < count; ++k) {
        const std::string name = r.bytes(r.get<std::uint32_t>());
        const auto group = r.get<std::uint8_t>() == 0 ? ParamGroup::frozen : ParamGroup::trainable;
        Grid::Shape shape;
        for (int& d : shape) {
            d = r.get<std::int32_t>();
        }
        Parameter* p = params.find(name);
        if (!p) {
            throw VersionError(name, "parameter not present in the model");
        }
        if (p->group != group) {
            throw IntegrityError("parameter '" + name + "' stored as " + group_name(group));
        }
        if (p->var.shape() != shape) {
            throw VersionError(name, "stored shape " + shape_str(shape) + " != model shape " +
                                         p->var.value().shape_str());
        }
        Grid& v = p->var.mutable_value();
        r.read_doubles(v.data(), v.size());
    }
    if (!r.done()) {
        throw IntegrityError("checkpoint " + path + " has trailing bytes");
    }
    out.model = std::move(model);
    return out;
}

}  // namespace sketchinpaint
