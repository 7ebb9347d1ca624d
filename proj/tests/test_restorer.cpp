#include "doctest.h"

#include <cmath>

#include "rnsde/restorer.hpp"

using namespace rnsde;

TEST_SUITE_BEGIN("restorer");

TEST_CASE("untrained model is the identity on its input") {
    Rng rng(1);
    Restorer model({.width = 8, .blocks = 2}, rng);
    Rng data_rng(2);
    Tensor x({12, 12});
    for (auto& v : x.data) v = static_cast<float>(data_rng.normal());
    Tensor out = model.restore(x);
    CHECK(out.shape == x.shape);
    CHECK(out.data == x.data);  // zero-initialized output stage
}

TEST_CASE("inference is deterministic") {
    Rng rng(3);
    Restorer model({.width = 8, .blocks = 2, .dropout = 0.5f}, rng);
    Tensor x({10, 10}, 0.4f);
    CHECK(model.restore(x).data == model.restore(x).data);
}

TEST_CASE("overfits a single pair") {
    Rng rng(4);
    Restorer model({.width = 8, .blocks = 2, .dropout = 0.0f}, rng);
    Rng data_rng(5);
    Tensor gt({10, 10}), fbp_img({10, 10});
    for (std::size_t i = 0; i < gt.size(); ++i) {
        gt[i] = static_cast<float>(0.5 + 0.2 * data_rng.normal());
        fbp_img[i] = gt[i] + static_cast<float>(0.1 * data_rng.normal());
    }
    std::vector<RestorerPair> ds = {{fbp_img, gt}};
    std::vector<double> curve =
        train_restorer(ds, {}, model, {.steps = 400, .batch = 1, .lr = 2e-3, .seed = 6});
    CHECK(curve.back() < 0.01 * curve.front());
}

TEST_CASE("training is seeded-reproducible") {
    auto run = [] {
        Rng rng(7);
        Restorer model({.width = 4, .blocks = 1, .dropout = 0.0f}, rng);
        Tensor gt({8, 8}, 0.5f), fb({8, 8}, 0.3f);
        std::vector<RestorerPair> ds = {{fb, gt}};
        train_restorer(ds, {}, model, {.steps = 25, .batch = 1, .seed = 8});
        return model.params().entry("out.w").value.data;
    };
    CHECK(run() == run());
}

TEST_SUITE_END();
