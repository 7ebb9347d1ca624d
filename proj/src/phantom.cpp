#include "rnsde/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "rnsde/rng.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace rnsde {

PhantomKind phantom_kind_from_string(const std::string& s) {
    if (s == "ellipses") return PhantomKind::ellipses;
    if (s == "blobs") return PhantomKind::blobs;
    if (s == "mixed") return PhantomKind::mixed;
    throw std::invalid_argument("unknown phantom kind: " + s);
}

std::string to_string(PhantomKind k) {
    switch (k) {
        case PhantomKind::ellipses: return "ellipses";
        case PhantomKind::blobs: return "blobs";
        default: return "mixed";
    }
}

namespace {

struct Ellipse {
    double cx, cy, a, b, phi, intensity;
};

struct Blob {
    double cx, cy, r, intensity;
};

// Fraction of a pixel covered by the ellipse, 4x4 supersampled.
double ellipse_coverage(const Ellipse& e, int i, int j) {
    const double c = std::cos(e.phi), s = std::sin(e.phi);
    int hit = 0;
    for (int si = 0; si < 4; ++si)
        for (int sj = 0; sj < 4; ++sj) {
            const double y = i + (si + 0.5) / 4.0 - 0.5 - e.cy;
            const double x = j + (sj + 0.5) / 4.0 - 0.5 - e.cx;
            const double u = (c * x + s * y) / e.a;
            const double v = (-s * x + c * y) / e.b;
            if (u * u + v * v <= 1.0) ++hit;
        }
    return hit / 16.0;
}

}  // namespace

Tensor generate_phantom(const PhantomSpec& spec, int id) {
    if (spec.size < 8 || spec.max_shapes < spec.min_shapes || spec.min_shapes < 1)
        throw std::invalid_argument("generate_phantom: bad spec");
    const int n = spec.size;
    const double center = (n - 1) / 2.0;
    const double R = n / 2.0 - 1.5;  // keep a margin inside the inscribed circle

    Rng rng(spec.seed ^ (static_cast<std::uint64_t>(id) + 1) * 0x9e3779b97f4a7c15ull);
    Tensor img({n, n});

    const bool want_ellipses = spec.kind != PhantomKind::blobs;
    const bool want_blobs = spec.kind != PhantomKind::ellipses;
    const int count =
        spec.min_shapes + static_cast<int>(rng.below(spec.max_shapes - spec.min_shapes + 1));

    for (int k = 0; k < count; ++k) {
        const bool use_ellipse =
            want_ellipses && (!want_blobs || rng.uniform() < 0.5);
        const double intensity =
            spec.min_intensity + rng.uniform() * (spec.max_intensity - spec.min_intensity);
        const double sign = (k > 0 && rng.uniform() < 0.25) ? -1.0 : 1.0;  // occasional cavity

        if (use_ellipse) {
            Ellipse e;
            e.a = R * (0.10 + 0.35 * rng.uniform());
            e.b = R * (0.10 + 0.35 * rng.uniform());
            const double rmax = std::max(e.a, e.b);
            const double rho = (R - rmax) * std::sqrt(rng.uniform());
            const double ang = 2.0 * std::numbers::pi * rng.uniform();
            e.cx = center + rho * std::cos(ang);
            e.cy = center + rho * std::sin(ang);
            e.phi = std::numbers::pi * rng.uniform();
            e.intensity = sign * intensity;
            const int j0 = std::max(0, static_cast<int>(e.cx - rmax - 1));
            const int j1 = std::min(n - 1, static_cast<int>(e.cx + rmax + 2));
            const int i0 = std::max(0, static_cast<int>(e.cy - rmax - 1));
            const int i1 = std::min(n - 1, static_cast<int>(e.cy + rmax + 2));
            for (int i = i0; i <= i1; ++i)
                for (int j = j0; j <= j1; ++j)
                    img.at(i, j) += static_cast<float>(e.intensity * ellipse_coverage(e, i, j));
        } else {
            Blob b;
            b.r = n * spec.texture_bandwidth * (0.4 + 0.8 * rng.uniform());
            const double rho = std::max(0.0, R - b.r) * std::sqrt(rng.uniform());
            const double ang = 2.0 * std::numbers::pi * rng.uniform();
            b.cx = center + rho * std::cos(ang);
            b.cy = center + rho * std::sin(ang);
            b.intensity = sign * intensity;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    const double dx = j - b.cx, dy = i - b.cy;
                    const double d2 = (dx * dx + dy * dy) / (b.r * b.r);
                    if (d2 < 9.0) img.at(i, j) += static_cast<float>(b.intensity * std::exp(-d2));
                }
        }
    }

    // hard support constraint + clip to [0,1]
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double dx = j - center, dy = i - center;
            if (dx * dx + dy * dy > (n / 2.0) * (n / 2.0))
                img.at(i, j) = 0.0f;
            else
                img.at(i, j) = std::clamp(img.at(i, j), 0.0f, 1.0f);
        }
    return img;
}

namespace {

DatasetItem write_item(const PhantomSpec& spec, int id, const Geometry& geom,
                       const fs::path& dir) {
    DatasetItem it;
    it.id = id;
    Tensor img = generate_phantom(spec, id);
    Sinogram sino = radon(img, geom);
    Tensor mu = fbp(sino, spec.size);

    const std::string stem = (dir / std::to_string(id)).string();
    it.img_path = stem + ".img.rnt";
    it.sino_path = stem + ".sino.rnt";
    it.fbp_path = stem + ".fbp.rnt";
    save_tensor(it.img_path, img);
    save_tensor(it.sino_path, sino.values);
    save_tensor(it.fbp_path, mu);
    it.img_checksum = fnv1a_file(it.img_path);
    it.sino_checksum = fnv1a_file(it.sino_path);
    it.fbp_checksum = fnv1a_file(it.fbp_path);
    return it;
}

json item_to_json(const DatasetItem& it) {
    return json{{"id", it.id},
                {"img", it.img_path},
                {"sino", it.sino_path},
                {"fbp", it.fbp_path},
                {"img_checksum", it.img_checksum},
                {"sino_checksum", it.sino_checksum},
                {"fbp_checksum", it.fbp_checksum}};
}

DatasetItem item_from_json(const json& j) {
    DatasetItem it;
    it.id = j.at("id").get<int>();
    it.img_path = j.at("img").get<std::string>();
    it.sino_path = j.at("sino").get<std::string>();
    it.fbp_path = j.at("fbp").get<std::string>();
    it.img_checksum = j.at("img_checksum").get<std::uint64_t>();
    it.sino_checksum = j.at("sino_checksum").get<std::uint64_t>();
    it.fbp_checksum = j.at("fbp_checksum").get<std::uint64_t>();
    return it;
}

}  // namespace

DatasetManifest build_dataset(const PhantomSpec& spec, int n_train, int n_test,
                              const Geometry& geom, const std::string& out_dir) {
    if (n_test < 1 || n_train < 0) throw std::invalid_argument("build_dataset: bad split sizes");
    if (geom.num_detectors != spec.size)
        throw std::invalid_argument("build_dataset: detector count must match phantom size");

    DatasetManifest m;
    m.spec = spec;
    m.num_detectors = geom.num_detectors;
    m.theta_miss_deg = geom.theta_miss_deg;
    m.angle_step_deg = geom.angle_step_deg;

    const fs::path root(out_dir);
    fs::create_directories(root / "train");
    fs::create_directories(root / "test");
    for (int i = 0; i < n_train; ++i) m.train.push_back(write_item(spec, i, geom, root / "train"));
    for (int i = 0; i < n_test; ++i)
        m.test.push_back(write_item(spec, n_train + i, geom, root / "test"));

    // leakage guard: the id ranges are disjoint by construction, but assert anyway
    for (const auto& a : m.train)
        for (const auto& b : m.test)
            if (a.id == b.id) throw std::logic_error("build_dataset: train/test id overlap");

    save_manifest((root / "manifest.json").string(), m);
    return m;
}

void save_manifest(const std::string& path, const DatasetManifest& m) {
    json j;
    j["spec"] = {{"size", m.spec.size},
                 {"kind", to_string(m.spec.kind)},
                 {"min_shapes", m.spec.min_shapes},
                 {"max_shapes", m.spec.max_shapes},
                 {"min_intensity", m.spec.min_intensity},
                 {"max_intensity", m.spec.max_intensity},
                 {"texture_bandwidth", m.spec.texture_bandwidth},
                 {"seed", m.spec.seed}};
    j["geometry"] = {{"num_detectors", m.num_detectors},
                     {"theta_miss_deg", m.theta_miss_deg},
                     {"angle_step_deg", m.angle_step_deg}};
    j["train"] = json::array();
    j["test"] = json::array();
    for (const auto& it : m.train) j["train"].push_back(item_to_json(it));
    for (const auto& it : m.test) j["test"].push_back(item_to_json(it));

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    json j = json::parse(in);

    DatasetManifest m;
    const json& s = j.at("spec");
    m.spec.size = s.at("size").get<int>();
    m.spec.kind = phantom_kind_from_string(s.at("kind").get<std::string>());
    m.spec.min_shapes = s.at("min_shapes").get<int>();
    m.spec.max_shapes = s.at("max_shapes").get<int>();
    m.spec.min_intensity = s.at("min_intensity").get<double>();
    m.spec.max_intensity = s.at("max_intensity").get<double>();
    m.spec.texture_bandwidth = s.at("texture_bandwidth").get<double>();
    m.spec.seed = s.at("seed").get<std::uint64_t>();
    const json& g = j.at("geometry");
    m.num_detectors = g.at("num_detectors").get<int>();
    m.theta_miss_deg = g.at("theta_miss_deg").get<double>();
    m.angle_step_deg = g.at("angle_step_deg").get<double>();
    for (const auto& it : j.at("train")) m.train.push_back(item_from_json(it));
    for (const auto& it : j.at("test")) m.test.push_back(item_from_json(it));
    return m;
}

namespace {

std::vector<Tensor> load_paths(const DatasetManifest& m, const std::string& split, bool fbp_files) {
    const std::vector<DatasetItem>* items = nullptr;
    if (split == "train")
        items = &m.train;
    else if (split == "test")
        items = &m.test;
    else
        throw std::invalid_argument("unknown split: " + split);
    std::vector<Tensor> out;
    out.reserve(items->size());
    for (const auto& it : *items) out.push_back(load_tensor(fbp_files ? it.fbp_path : it.img_path));
    return out;
}

}  // namespace

std::vector<Tensor> load_split_images(const DatasetManifest& m, const std::string& split) {
    return load_paths(m, split, false);
}

std::vector<Tensor> load_split_fbp(const DatasetManifest& m, const std::string& split) {
    return load_paths(m, split, true);
}

}  // namespace rnsde
