// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "pigment/session.hpp"
#include "scenarios.hpp"

using namespace pigment;

namespace {

Session started(double gamma = 0.3, GenerationConfig cfg = scenario::config(12), std::string text = "a cat") {
    Session s(scenario::toy_backends(gamma));
    s.start(Image(64, 64), Bitmap(64, 64, true), single_prompt(std::move(text)), {}, cfg);
    return s;
}

PromptMix two(double w) {
    return {{"a", "b"}, {"a cat", "a dog"}, MixWeights({1.0 - w, w})};
}

}  // namespace

TEST(Session, StartsIdleAndRefusesCommands) {
    Session s(scenario::toy_backends(0.3));
    EXPECT_EQ(s.status(), SessionStatus::idle);
    EXPECT_THROW(s.step(), StateError);
    EXPECT_THROW(s.stop(), StateError);
    EXPECT_THROW(s.resume(), StateError);
    EXPECT_THROW(s.rollback(0), StateError);
    EXPECT_THROW(s.intervene(single_prompt("x"), std::nullopt), StateError);
}

TEST(Session, StartValidatesBeforeTouchingState) {
    Session s(scenario::toy_backends(0.3));
    EXPECT_THROW(s.start(Image(64, 64), Bitmap(64, 64), single_prompt("x"), {}, scenario::config(5)), ContractError);
    EXPECT_THROW(s.start(Image(64, 64), Bitmap(32, 32, true), single_prompt("x"), {}, scenario::config(5)), ContractError);
    EXPECT_THROW(s.start(Image(32, 32), Bitmap(32, 32, true), single_prompt("x"), {}, scenario::config(5)), ContractError);
    auto cfg = scenario::config(5);
    cfg.single_stroke = 6;
    EXPECT_THROW(s.start(Image(64, 64), Bitmap(64, 64, true), single_prompt("x"), {}, cfg), ContractError);
    EXPECT_EQ(s.status(), SessionStatus::idle);
}

TEST(Session, SingleStrokeEqualToStepsRunsInOneRound) {
    auto cfg = scenario::config(12);
    cfg.single_stroke = 12;
    auto s = started(0.3, cfg);
    EXPECT_EQ(s.run_round().size(), 12u);
    EXPECT_EQ(s.status(), SessionStatus::done);
}

TEST(Session, SingleStrokeOneYieldsOneFramePerStep) {
    auto s = started();
    int frames = 0;
    s.run_to_end([&](const Frame& f) {
        EXPECT_EQ(f.step, frames);
        EXPECT_EQ(f.total, 12);
        ++frames;
    });
    EXPECT_EQ(frames, 12);
    EXPECT_EQ(s.cursor(), 12);
    EXPECT_EQ(s.entries().size(), 12u);
}

TEST(Session, RoundsShorterAtTheEnd) {
    auto cfg = scenario::config(10);
    cfg.single_stroke = 4;
    auto s = started(0.3, cfg);
    EXPECT_EQ(s.run_round().size(), 4u);
    EXPECT_EQ(s.run_round().size(), 4u);
    EXPECT_EQ(s.run_round().size(), 2u);
    EXPECT_TRUE(s.run_round().empty());
}

TEST(Session, Deterministic) {
    auto a = started();
    auto b = started();
    a.run_to_end();
    b.run_to_end();
    EXPECT_EQ(a.latent(), b.latent());
    EXPECT_EQ(encode_png(a.preview()), encode_png(b.preview()));
}

TEST(Session, IdenticalInterventionIsANoOp) {
    auto a = started();
    auto b = started();
    for (int k = 0; k < 5; ++k) {
        a.step();
        b.step();
    }
    b.intervene(single_prompt("a cat"), std::vector<AxisSetting>{});
    a.run_to_end();
    b.run_to_end();
    EXPECT_EQ(a.latent(), b.latent());
}

TEST(Session, GammaOneLandsOnTheNewTarget) {
    auto s = started(1.0, scenario::config(12, 1.0));
    for (int k = 0; k < 6; ++k) s.step();
    s.intervene(single_prompt("a dog"), std::nullopt);
    s.run_to_end();
    const auto& d = dynamic_cast<const ToyDenoiser&>(*s.backends().denoiser);
    const auto target = d.target(s.guidance());
    for (std::size_t i = 0; i < target.size(); ++i) EXPECT_NEAR(s.latent()[i], target[i], 1e-5);
}

TEST(Session, InterventionChangesOnlyLaterSteps) {
    auto a = started(0.3, scenario::config(12), "a cat");
    auto b = started(0.3, scenario::config(12), "a cat");
    a.run_to_end();
    for (int k = 0; k < 4; ++k) b.step();
    b.intervene(two(0.8), std::nullopt);
    b.run_to_end();
    for (int k = 0; k < 4; ++k) EXPECT_EQ(a.entries()[k].latent, b.entries()[k].latent) << k;
    EXPECT_NE(a.entries()[4].latent, b.entries()[4].latent);
}

TEST(Session, StopAtKKeepsKEntries) {
    auto s = started();
    for (int k = 0; k < 7; ++k) s.step();
    s.stop();
    EXPECT_EQ(s.status(), SessionStatus::stopped);
    EXPECT_EQ(s.entries().size(), 7u);
    EXPECT_EQ(s.latent(), s.entries().back().latent);
    EXPECT_THROW(s.step(), StateError);
    EXPECT_THROW(s.stop(), StateError);
    s.resume();
    EXPECT_THROW(s.resume(), StateError);
    s.run_to_end();
    EXPECT_EQ(s.status(), SessionStatus::done);
}

TEST(Session, StopResumeMatchesUninterruptedRun) {
    auto a = started();
    auto b = started();
    a.run_to_end();
    for (int k = 0; k < 5; ++k) b.step();
    b.stop();
    b.resume();
    b.run_to_end();
    EXPECT_EQ(a.latent(), b.latent());
}

TEST(Session, RollbackRestoresPrefixAndReplays) {
    auto s = started();
    s.run_to_end();
    const auto reference = s.entries();
    EXPECT_THROW(s.rollback(13), ContractError);
    EXPECT_THROW(s.rollback(-1), ContractError);
    s.rollback(12);  // to the cursor: nothing happens
    EXPECT_EQ(s.status(), SessionStatus::done);
    s.rollback(5);
    EXPECT_EQ(s.status(), SessionStatus::stopped);
    EXPECT_EQ(s.cursor(), 5);
    EXPECT_EQ(s.latent(), reference[4].latent);
    s.resume();
    s.run_to_end();
    EXPECT_EQ(s.latent(), reference.back().latent);
}

TEST(Session, RollbackToZeroRestoresInitialLatent) {
    auto s = started();
    for (int k = 0; k < 3; ++k) s.step();
    s.stop();
    s.rollback(0);
    EXPECT_EQ(s.cursor(), 0);
    EXPECT_EQ(s.latent(), s.initial());
    EXPECT_THROW(s.undo(), ContractError);
}

TEST(Session, RollbackKeepsCurrentGuidance) {
    auto s = started();
    for (int k = 0; k < 6; ++k) s.step();
    s.intervene(two(0.5), std::nullopt);
    s.step();
    s.stop();
    s.rollback(2);
    EXPECT_EQ(s.mix(), two(0.5));
    s.resume();
    s.step();
    EXPECT_EQ(s.entries()[2].guidance.data, s.guidance().data);
    EXPECT_EQ(s.entries().size(), 3u);
}

TEST(Session, UndoStepsBackOne) {
    auto s = started();
    for (int k = 0; k < 4; ++k) s.step();
    s.stop();
    s.undo();
    EXPECT_EQ(s.cursor(), 3);
    EXPECT_EQ(s.latent(), s.entries()[2].latent);
}

TEST(Session, PathRecordsWeightsBeforeAndAfterIntervention) {
    auto s = started();
    s.intervene(two(0.25), std::nullopt);
    for (int k = 0; k < 3; ++k) s.step();
    AxisSetting warm{"temp", "warm", "cold", {255, 0, 0}, {0, 0, 255}, 0.5};
    s.intervene(two(0.75), std::vector<AxisSetting>{warm});
    for (int k = 0; k < 2; ++k) s.step();
    const auto points = s.path().points();
    ASSERT_EQ(points.size(), 5u);
    EXPECT_DOUBLE_EQ(points[2].weights[1], 0.25);
    EXPECT_EQ(points[2].display_color, kNeutralPathColor);
    EXPECT_DOUBLE_EQ(points[3].weights[1], 0.75);
    ASSERT_EQ(points[3].axis_weights.size(), 1u);
    EXPECT_EQ(points[3].axis_weights[0].first, "temp");
    EXPECT_EQ(points[3].display_color, (Color{192, 64, 64}));
    EXPECT_EQ(s.path().highlighted(s.cursor()), 4u);
}

TEST(Session, BadAxisWeightRejectedWithoutSideEffects) {
    auto s = started();
    s.step();
    AxisSetting bad{"x", "warm", "cold", {}, {}, 1.5};
    EXPECT_THROW(s.intervene(std::nullopt, std::vector<AxisSetting>{bad}), ContractError);
    EXPECT_TRUE(s.axes().empty());
    EXPECT_EQ(s.status(), SessionStatus::running);
}
