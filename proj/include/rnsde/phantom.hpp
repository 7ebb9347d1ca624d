#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rnsde/tensor.hpp"
#include "rnsde/tomo.hpp"

namespace rnsde {

enum class PhantomKind { ellipses, blobs, mixed };

struct PhantomSpec {
    int size = 64;
    PhantomKind kind = PhantomKind::mixed;
    int min_shapes = 2;
    int max_shapes = 6;
    double min_intensity = 0.15;
    double max_intensity = 0.95;
    double texture_bandwidth = 0.18;  // blob radius as a fraction of the image
    std::uint64_t seed = 0;
};

PhantomKind phantom_kind_from_string(const std::string& s);
std::string to_string(PhantomKind k);

// Deterministic for (spec.seed, id); values in [0,1]; mass inside the
// inscribed circle. Edges are anti-aliased by supersampled coverage.
Tensor generate_phantom(const PhantomSpec& spec, int id);

struct DatasetItem {
    int id = 0;
    std::string img_path;
    std::string sino_path;
    std::string fbp_path;
    std::uint64_t img_checksum = 0;
    std::uint64_t sino_checksum = 0;
    std::uint64_t fbp_checksum = 0;
};

struct DatasetManifest {
    PhantomSpec spec;
    int num_detectors = 0;
    double theta_miss_deg = 0.0;
    double angle_step_deg = 0.0;
    std::vector<DatasetItem> train;
    std::vector<DatasetItem> test;
};

// Writes out_dir/{train,test}/<id>.{img,sino,fbp}.rnt plus
// out_dir/manifest.json. Train/test id sets are disjoint by construction
// (train ids 0..n_train-1, test ids continue from n_train).
DatasetManifest build_dataset(const PhantomSpec& spec, int n_train, int n_test,
                              const Geometry& geom, const std::string& out_dir);

void save_manifest(const std::string& path, const DatasetManifest& m);
DatasetManifest load_manifest(const std::string& path);

// Convenience loaders for evaluation and training.
std::vector<Tensor> load_split_images(const DatasetManifest& m, const std::string& split);
std::vector<Tensor> load_split_fbp(const DatasetManifest& m, const std::string& split);

}  // namespace rnsde
