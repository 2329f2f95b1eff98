// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <fstream>
#include <regex>
#include <sstream>

// The gateway only routes. Numeric work belongs to the palette, session and
// codec layers, so the gateway source must not do any.

namespace {

std::string source(const char* rel) {
    std::ifstream in(std::string(PIGMENT_SOURCE_DIR) + "/" + rel);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST(Layering, GatewayDoesNoMath) {
    const auto text = source("include/pigment/gateway.hpp");
    ASSERT_FALSE(text.empty());
    for (const char* banned : {"std::sqrt", "std::exp", "std::tanh", "std::cos", "std::sin", "std::log", "std::pow",
                               "<cmath>", "cfg_combine", "ddim_step", "mask_step", "add_noise", "weights_at(",
                               "interpolate(", ".values()"}) {
        EXPECT_EQ(text.find(banned), std::string::npos) << banned;
    }
    // No arithmetic on indexed tensor elements.
    EXPECT_FALSE(std::regex_search(text, std::regex(R"(\]\s*[-+*/]=?\s*[A-Za-z_(])")));
}

TEST(Layering, SessionDoesNotTalkToTransports) {
    const auto text = source("include/pigment/session.hpp");
    for (const char* banned : {"pigment/transport.hpp", "pigment/net.hpp", "pigment/gateway.hpp", "pigment/wire.hpp", "Envelope"}) {
        EXPECT_EQ(text.find(banned), std::string::npos) << banned;
    }
}
