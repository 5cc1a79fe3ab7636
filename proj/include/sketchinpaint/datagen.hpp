#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sketchinpaint/bezier.hpp"
#include "sketchinpaint/grid.hpp"
#include "sketchinpaint/random.hpp"

namespace sketchinpaint {

struct InstanceSample {
    std::string id;
    Grid image;          // (1, 3, H, W) in [0, 1]
    Grid instance_mask;  // (1, 1, H, W), 1 = object
    std::string caption;
};

struct DatagenConfig {
    int dilation_levels = 5;  // D
    int blur_levels = 4;      // S
    double coverage_min = 0.50;
    double coverage_max = 0.60;
    double coverage_ceiling = 0.61;
    std::string sketch_type = "canny";
};

struct Provenance {
    int d = 0;
    int s = 0;
    ScanDirection direction = ScanDirection::left_to_right;
    std::string sketch_type;
    double coverage = 0.0;
    std::uint64_t seed = 0;
    bool fallback = false;
};

// One training sample. The image, instance mask and full sketch are kept next to
// the four-tuple proper so training can derive segmentation and box masks.
struct FourTuple {
    std::string id;
    Grid image;
    Grid instance_mask;
    Grid sketch;
    Grid masked_image;    // image * pm
    Grid partial_mask;    // 1 = visible, 0 = corrupted
    Grid partial_sketch;  // (1 - pm) * m0 * sketch
    Grid selected_mask;   // m_{d,s} that was scanned
    std::string caption;
    Provenance provenance;
};

// Builds the mask ladder entry m_{d,s} with d in [0, D - 1] and s in [0, S], scans it
// along a random direction to a random coverage in [coverage_min, coverage_max],
// extracts the sketch and composes the partial sketch. The random stream is
// seeded from (id, seed) only. Throws ValueError for an empty instance mask.
FourTuple build_four_tuple(const InstanceSample& sample, const DatagenConfig& config, std::uint64_t seed);
void validate_instance(const InstanceSample& sample);

// Synthetic stand-in corpus: one ellipse, polygon or bird-like blob per textured
// canvas, with a caption naming its colour, shape and pose.
struct SynthSample {
    InstanceSample sample;
    std::string shape;
    std::string color;
    std::string pose;
};
std::vector<SynthSample> synth_corpus(int n, int canvas, Rng& rng);
const std::vector<std::string>& synth_color_names();

// Manifest: one JSON object per line with fields, in order, id, image,
// instance_mask, sketch, masked_image, partial_mask, partial_sketch, caption, d, s,
// direction, sketch_type, coverage, seed, fallback. Paths are relative to the
// manifest's directory.
struct ManifestRecord {
    std::string id;
    std::string image, instance_mask, sketch, masked_image, partial_mask, partial_sketch;
    std::string caption;
    Provenance provenance;
};

std::string manifest_line(const ManifestRecord& record);
// Throws IngestionError naming the line on malformed input.
std::vector<ManifestRecord> read_manifest(const std::string& path);
// Writes the tuple's PNGs under out_dir/samples and returns its record.
ManifestRecord write_four_tuple(const FourTuple& tuple, const std::string& out_dir);
FourTuple load_four_tuple(const ManifestRecord& record, const std::string& manifest_dir);

// Corpus layout: images/<id>.png, masks/<id>.png and captions.txt with one
// "<id>\t<caption>" record per line.
std::vector<InstanceSample> read_corpus(const std::string& dir);
void write_corpus(const std::string& dir, const std::vector<InstanceSample>& samples);

}  // namespace sketchinpaint
