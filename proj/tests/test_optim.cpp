// SPDX-License-Identifier: Apache-2.0
//
// vqcsi — digital CSI feedback simulation for near-field XL-MIMO links
// Copyright (C) 2026 the vqcsi authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <string>

#include "vqcsi/grad/adam.hpp"
#include "vqcsi/grad/ops.hpp"
#include "vqcsi/grad/param_store.hpp"
#include "vqcsi/rng.hpp"

using namespace vqcsi;

TEST_CASE("param store creates once and hands back the same node") {
    grad::ParamStore<double> store;
    auto w1 = store.param("w", [] { return Tensor<double>::full({2}, 1.0); });
    auto w2 = store.param("w", [] { return Tensor<double>::full({2}, 9.0); });
    CHECK(w1.get() == w2.get());
    CHECK(w1->value[0] == 1.0);  // second init never ran
    CHECK(w1->requires_grad);
    auto b = store.buffer("stats", [] { return Tensor<double>::zeros({3}); });
    CHECK_FALSE(b->requires_grad);
    CHECK_THROWS_AS(store.param("stats", [] { return Tensor<double>::zeros({3}); }),
                    contract_error);
    CHECK(store.names() == std::vector<std::string>{"w", "stats"});
    CHECK(store.trainable_scalars() == 2);
}

TEST_CASE("first adam step moves weights by about the learning rate") {
    grad::ParamStore<double> store;
    auto w = store.param("w", [] { return Tensor<double>({3}, {1.0, -2.0, 0.5}); });
    auto loss = grad::sum_all(grad::mul(w, w));
    grad::backward(loss);
    grad::Adam<double> opt;
    opt.step(store, 0.1);
    // with bias correction the first update is lr * g / (|g| + eps)
    CHECK(w->value[0] == doctest::Approx(1.0 - 0.1).epsilon(1e-6));
    CHECK(w->value[1] == doctest::Approx(-2.0 + 0.1).epsilon(1e-6));
    CHECK(w->value[2] == doctest::Approx(0.5 - 0.1).epsilon(1e-6));
    CHECK_FALSE(w->grad_ready);  // step clears gradients
    CHECK(opt.steps() == 1);
}

TEST_CASE("adam drives a quadratic bowl toward its minimum") {
    grad::ParamStore<double> store;
    Rng rng(33);
    auto w = store.param("w", [&] { return Tensor<double>::uniform({8}, 2.0, rng); });
    grad::Adam<double> opt;
    double last = 1e9;
    for (int t = 0; t < 400; ++t) {
        auto loss = grad::sum_all(grad::mul(w, w));
        last = loss->value[0];
        grad::backward(loss);
        opt.step(store, 0.05);
    }
    CHECK(last < 1e-3);
}

TEST_CASE("parameters outside the current graph are left alone") {
    grad::ParamStore<double> store;
    auto a = store.param("a", [] { return Tensor<double>::full({2}, 1.0); });
    auto b = store.param("b", [] { return Tensor<double>::full({2}, 5.0); });
    auto loss = grad::sum_all(grad::mul(a, a));
    grad::backward(loss);
    grad::Adam<double> opt;
    opt.step(store, 0.1);
    CHECK(b->value[0] == 5.0);
    CHECK(a->value[0] != 1.0);
}

TEST_CASE("cosine schedule anneals from lr0 to zero") {
    CHECK(grad::cosine_lr(0.4, 0, 100) == doctest::Approx(0.4));
    CHECK(grad::cosine_lr(0.4, 50, 100) == doctest::Approx(0.2));
    CHECK(grad::cosine_lr(0.4, 100, 100) == doctest::Approx(0.0));
    CHECK(grad::cosine_lr(0.4, 25, 100) > grad::cosine_lr(0.4, 75, 100));
    CHECK_THROWS_AS(grad::cosine_lr(0.4, 0, 0), contract_error);
}

TEST_CASE("checkpoints round-trip parameters, buffers, meta, and moments") {
    const std::string path = "ck_roundtrip.bin";
    grad::ParamStore<double> store;
    Rng rng(44);
    auto w = store.param("enc.w", [&] { return Tensor<double>::uniform({3, 2}, 1.0, rng); });
    auto s = store.buffer("bn.mean", [&] { return Tensor<double>::uniform({4}, 1.0, rng); });
    auto loss = grad::mean_all(grad::mul(w, w));
    grad::backward(loss);
    grad::Adam<double> opt;
    opt.step(store, 0.01);

    grad::Checkpoint<double> ck;
    ck.meta["epoch"] = "3";
    for (const auto& name : store.names())
        ck.arrays.push_back({store.trainable(name) ? 'p' : 'b', name, store.at(name)->value});
    opt.save_into(ck);
    grad::save_checkpoint(path, ck);

    auto loaded = grad::load_checkpoint<double>(path);
    CHECK(loaded.meta.at("epoch") == "3");
    CHECK(loaded.meta.at("adam_steps") == "1");

    grad::ParamStore<double> fresh;
    fresh.param("enc.w", [] { return Tensor<double>::zeros({3, 2}); });
    fresh.buffer("bn.mean", [] { return Tensor<double>::zeros({4}); });
    grad::restore_into(fresh, loaded);
    for (std::int64_t i = 0; i < 6; ++i)
        CHECK(fresh.at("enc.w")->value[i] == doctest::Approx(w->value[i]));
    for (std::int64_t i = 0; i < 4; ++i)
        CHECK(fresh.at("bn.mean")->value[i] == doctest::Approx(s->value[i]));

    grad::Adam<double> opt2;
    opt2.restore_from(loaded);
    CHECK(opt2.steps() == 1);
    std::remove(path.c_str());
}

TEST_CASE("restore validates before committing") {
    const std::string path = "ck_mismatch.bin";
    grad::Checkpoint<double> ck;
    ck.arrays.push_back({'p', "w", Tensor<double>::full({2}, 1.0)});
    grad::save_checkpoint(path, ck);
    auto loaded = grad::load_checkpoint<double>(path);

    grad::ParamStore<double> wrong_shape;
    wrong_shape.param("w", [] { return Tensor<double>::zeros({3}); });
    CHECK_THROWS_AS(grad::restore_into(wrong_shape, loaded), contract_error);
    CHECK(wrong_shape.at("w")->value[0] == 0.0);  // untouched

    grad::ParamStore<double> missing;
    missing.param("w", [] { return Tensor<double>::zeros({2}); });
    missing.param("extra", [] { return Tensor<double>::zeros({1}); });
    CHECK_THROWS_AS(grad::restore_into(missing, loaded), contract_error);
    std::remove(path.c_str());
}

TEST_CASE("corrupt checkpoint files are rejected") {
    const std::string path = "ck_corrupt.bin";
    {
        std::ofstream f(path, std::ios::binary);
        f << "NOPE";
    }
    CHECK_THROWS_AS(grad::load_checkpoint<double>(path), file_error);
    {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        f << "VQCK";  // magic only, then truncated
    }
    CHECK_THROWS_AS(grad::load_checkpoint<double>(path), file_error);
    CHECK_THROWS_AS(grad::load_checkpoint<double>("does_not_exist.bin"), file_error);
    std::remove(path.c_str());
}
