#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "sketchinpaint/datagen.hpp"
#include "sketchinpaint/errors.hpp"
#include "sketchinpaint/image_io.hpp"

namespace fs = std::filesystem;

namespace sketchinpaint {

namespace {

Grid binarize(const Grid& g) {
    Grid out = g;
    for (double& v : out.values()) {
        v = v > 0.5 ? 1.0 : 0.0;
    }
    return out;
}

}  // namespace

std::string manifest_line(const ManifestRecord& r) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["image"] = r.image;
    j["instance_mask"] = r.instance_mask;
    j["sketch"] = r.sketch;
    j["masked_image"] = r.masked_image;
    j["partial_mask"] = r.partial_mask;
    j["partial_sketch"] = r.partial_sketch;
    j["caption"] = r.caption;
    j["d"] = r.provenance.d;
    j["s"] = r.provenance.s;
    j["direction"] = direction_name(r.provenance.direction);
    j["sketch_type"] = r.provenance.sketch_type;
    j["coverage"] = r.provenance.coverage;
    j["seed"] = r.provenance.seed;
    j["fallback"] = r.provenance.fallback;
    return j.dump();
}

std::vector<ManifestRecord> read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IngestionError(path, 0, "cannot open manifest");
    }
    std::vector<ManifestRecord> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            const auto j = nlohmann::json::parse(line);
            ManifestRecord r;
            r.id = j.at("id").get<std::string>();
            r.image = j.at("image").get<std::string>();
            r.instance_mask = j.at("instance_mask").get<std::string>();
            r.sketch = j.at("sketch").get<std::string>();
            r.masked_image = j.at("masked_image").get<std::string>();
            r.partial_mask = j.at("partial_mask").get<std::string>();
            r.partial_sketch = j.at("partial_sketch").get<std::string>();
            r.caption = j.at("caption").get<std::string>();
            r.provenance.d = j.at("d").get<int>();
            r.provenance.s = j.at("s").get<int>();
            r.provenance.direction = parse_direction(j.at("direction").get<std::string>());
            r.provenance.sketch_type = j.at("sketch_type").get<std::string>();
            r.provenance.coverage = j.at("coverage").get<double>();
            r.provenance.seed = j.at("seed").get<std::uint64_t>();
            r.provenance.fallback = j.at("fallback").get<bool>();
            out.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw IngestionError(path, lineno, e.what());
        } catch (const ParameterError& e) {
            throw IngestionError(path, lineno, e.what());
        }
    }
    return out;
}

ManifestRecord write_four_tuple(const FourTuple& t, const std::string& out_dir) {
    const fs::path dir = fs::path(out_dir) / "samples";
    fs::create_directories(dir);
    ManifestRecord r;
    r.id = t.id;
    r.caption = t.caption;
    r.provenance = t.provenance;
    auto put = [&](const Grid& g, const char* suffix) {
        const std::string rel = "samples/" + t.id + "_" + suffix + ".png";
        write_png((fs::path(out_dir) / rel).string(), g);
        return rel;
    };
    r.image = put(t.image, "image");
    r.instance_mask = put(t.instance_mask, "instance_mask");
    r.sketch = put(t.sketch, "sketch");
    r.masked_image = put(t.masked_image, "masked_image");
    r.partial_mask = put(t.partial_mask, "partial_mask");
    r.partial_sketch = put(t.partial_sketch, "partial_sketch");
    return r;
}

FourTuple load_four_tuple(const ManifestRecord& r, const std::string& manifest_dir) {
    auto path = [&](const std::string& rel) { return (fs::path(manifest_dir) / rel).string(); };
    FourTuple t;
    t.id = r.id;
    t.caption = r.caption;
    t.provenance = r.provenance;
    t.image = read_png(path(r.image), 3);
    t.instance_mask = binarize(read_png(path(r.instance_mask), 1));
    t.sketch = read_png(path(r.sketch), 1);
    t.masked_image = read_png(path(r.masked_image), 3);
    t.partial_mask = binarize(read_png(path(r.partial_mask), 1));
    t.partial_sketch = read_png(path(r.partial_sketch), 1);
    return t;
}

std::vector<InstanceSample> read_corpus(const std::string& dir) {
    const fs::path root(dir);
    const std::string captions = (root / "captions.txt").string();
    std::ifstream in(captions);
    if (!in) {
        throw IngestionError(captions, 0, "cannot open captions file");
    }
    std::vector<InstanceSample> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0) {
            throw IngestionError(captions, lineno, "expected '<id>\\t<caption>'");
        }
        InstanceSample s;
        s.id = line.substr(0, tab);
        s.caption = line.substr(tab + 1);
        s.image = read_png((root / "images" / (s.id + ".png")).string(), 3);
        s.instance_mask = binarize(read_png((root / "masks" / (s.id + ".png")).string(), 1));
        out.push_back(std::move(s));
    }
    return out;
}

void write_corpus(const std::string& dir, const std::vector<InstanceSample>& samples) {
    const fs::path root(dir);
    fs::create_directories(root / "images");
    fs::create_directories(root / "masks");
    std::ofstream captions(root / "captions.txt");
    for (const auto& s : samples) {
        write_png((root / "images" / (s.id + ".png")).string(), s.image);
        write_png((root / "masks" / (s.id + ".png")).string(), s.instance_mask);
        captions << s.id << '\t' << s.caption << '\n';
    }
    if (!captions) {
        throw Error("write_corpus: cannot write " + (root / "captions.txt").string());
    }
}

}  // namespace sketchinpaint
