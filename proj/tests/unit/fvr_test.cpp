// Copyright The ceir Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "ceir/fvr.hpp"
#include "ceir/synthetic.hpp"
#include "test_support.hpp"

namespace ceir {
namespace {

using testing::phantom;

TransitionalTF1D two_entry_tf() {
    TransitionalTF1D tf;
    tf.isovalue = 0.4;
    tf.delta_v = 0.2;
    tf.local.entries = {{0.2, {1, 0, 0}}, {1.0, {0, 0, 1}}};
    return tf;
}

TEST(EvalTf, BelowAndAboveTransition) {
    const auto tf = two_entry_tf();
    EXPECT_EQ(eval_tf(tf, 0.39).alpha, 0.0);
    const Rgba top = eval_tf(tf, 0.6);
    EXPECT_EQ(top.alpha, 1.0);
    EXPECT_EQ(top.color, (Rgb{0, 0, 1}));
    EXPECT_EQ(eval_tf(tf, 0.95).alpha, 1.0);
}

TEST(EvalTf, MidpointBetweenEntriesIsLinearMix) {
    const auto tf = two_entry_tf();
    // Entries sit at 0.45 and 0.55; halfway between them is 0.5.
    const Rgba mid = eval_tf(tf, 0.5);
    EXPECT_NEAR(mid.alpha, 0.6, 1e-12);
    EXPECT_LT(max_channel_diff(mid.color, {0.5, 0, 0.5}), 1e-12);
    const Rgba quarter = eval_tf(tf, 0.475);
    EXPECT_NEAR(quarter.alpha, 0.4, 1e-12);
    // Outer half sub-ranges hold the end entries.
    EXPECT_NEAR(eval_tf(tf, 0.42).alpha, 0.2, 1e-12);
    EXPECT_NEAR(eval_tf(tf, 0.58).alpha, 1.0, 1e-12);
}

Camera cam(int n) {
    Camera c;
    c.eye = {0.5, 0.5, -1.2};
    c.look_at = {0.5, 0.5, 0.5};
    c.vfov_deg = 45;
    c.image = {n, n};
    return c;
}

TEST(RenderFvr, TransparentTransferGivesBackground) {
    VolumeMeta m;
    m.dims = {8, 8, 8};
    const ScalarVolume vol(m, std::vector<float>(512, 0.2f));
    FvrOptions opt;
    opt.background = {0.1, 0.2, 0.3};
    const Image img = render_fvr(vol, cam(16), two_entry_tf(), 0.05, opt);
    for (const Rgb& p : img.pixels()) ASSERT_LT(max_channel_diff(p, opt.background), 1e-12);
}

TEST(RenderFvr, RejectsBadSampleDistance) {
    const auto vol = phantom(PhantomKind::sphere, 8);
    EXPECT_THROW(render_fvr(vol, cam(4), two_entry_tf(), 0.0), ConfigError);
}

TEST(RenderFvr, OutputStaysInUnitRange) {
    const auto vol = phantom(PhantomKind::shell_with_inclusions, 48);
    TransitionalTF1D tf = two_entry_tf();
    tf.isovalue = 0.3;
    tf.std_sample_distance = 0.005;
    FvrOptions opt;
    opt.shade = true;
    const Image img = render_fvr(vol, cam(32), tf, 0.01, opt);
    for (const Rgb& p : img.pixels())
        for (int k = 0; k < 3; ++k) ASSERT_TRUE(p[k] >= 0.0 && p[k] <= 1.0);
}

double mean_abs_diff(const Image& a, const Image& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.pixels().size(); ++i)
        for (int k = 0; k < 3; ++k) s += std::abs(a.pixels()[i][k] - b.pixels()[i][k]);
    return s / (3.0 * a.pixels().size());
}

double max_abs_diff(const Image& a, const Image& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.pixels().size(); ++i) s = std::max(s, max_channel_diff(a.pixels()[i], b.pixels()[i]));
    return s;
}

TEST(RenderFvr, SelfConvergesOnSphere) {
    const auto vol = phantom(PhantomKind::sphere, 64);
    TransitionalTF1D tf;
    tf.isovalue = 0.3;
    tf.delta_v = 0.4;
    tf.std_sample_distance = 0.01;
    tf.local.entries = {{0.1, {1, 0.8, 0.2}}, {0.2, {0.9, 0.4, 0.2}}, {0.3, {0.6, 0.2, 0.6}}, {1.0, {0.2, 0.3, 1.0}}};
    const Image a = render_fvr(vol, cam(48), tf, 0.004);
    const Image b = render_fvr(vol, cam(48), tf, 0.002);
    const Image c = render_fvr(vol, cam(48), tf, 0.001);
    EXPECT_LE(max_abs_diff(b, c), 2.0 / 255);
    const double d1 = mean_abs_diff(a, b), d2 = mean_abs_diff(b, c);
    EXPECT_GT(d1, 0.0);
    EXPECT_GE(d1 / d2, 2.0) << d1 << " " << d2;
}

}  // namespace
}  // namespace ceir
