#include "longtail/data.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

namespace {

using namespace longtail;

std::vector<std::size_t> exponential_oracle(int classes, double n_max, double n_min)
{
    std::vector<std::size_t> out;
    for (int j = 0; j < classes; ++j) {
        const double ratio = classes == 1 ? 0.0 : static_cast<double>(j) / (classes - 1);
        out.push_back(static_cast<std::size_t>(std::llround(n_max * std::pow(n_min / n_max, ratio))));
    }
    return out;
}

TEST(FeatureFile, ParsesSmallFile)
{
    std::istringstream in("3 2 2\n0 1.0 0.0\n0 0.9 0.1\n1 0.0 1.0\n");
    const auto data = read_feature_dataset(in);
    EXPECT_EQ(data.size(), 3U);
    EXPECT_EQ(data.dim(), 2);
    EXPECT_EQ(data.num_classes, 2);
    EXPECT_EQ(data.class_counts(), (std::vector<std::size_t>{2, 1}));
    EXPECT_DOUBLE_EQ(data.features(1, 1), 0.1);
}

TEST(FeatureFile, SkipsCommentsAndBlankLines)
{
    std::istringstream in("# header follows\n2 1 2\n\n0 1\n# mid\n1 -2.5\n");
    const auto data = read_feature_dataset(in);
    EXPECT_EQ(data.size(), 2U);
    EXPECT_DOUBLE_EQ(data.features(1, 0), -2.5);
}

TEST(FeatureFile, MissingClassIsAnError)
{
    std::istringstream in("2 1 3\n0 1\n1 2\n");
    try {
        read_feature_dataset(in);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("empty class 2"), std::string::npos) << e.what();
    }
}

TEST(FeatureFile, MissingClassAllowedForEvalSets)
{
    std::istringstream in("2 1 3\n0 1\n1 2\n");
    EXPECT_EQ(read_feature_dataset(in, true).num_classes, 3);
}

TEST(FeatureFile, RowArityMismatchNamesTheLine)
{
    std::istringstream in("2 2 1\n0 1.0 2.0\n0 1.0\n");
    try {
        read_feature_dataset(in);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("row arity mismatch at line 3"), std::string::npos)
            << e.what();
    }
}

TEST(FeatureFile, RejectsMalformedInput)
{
    const char* cases[] = {
        "",                   // empty
        "2 1\n0 1\n",         // short header
        "1 1 2\n2 0.5\n",     // label out of range
        "2 1 1\n0 1\n",       // too few rows
        "1 1 1\n0 1\n0 2\n",  // too many rows
        "1 1 1\n0 abc\n",     // bad value
        "1 1 1\n0 nan\n",     // non-finite
    };
    for (const char* text : cases) {
        std::istringstream in(text);
        EXPECT_THROW(read_feature_dataset(in), Error) << text;
    }
}

TEST(FeatureFile, RoundTripIsExact)
{
    Rng rng(7);
    RowMatrix features(40, 5);
    std::vector<int> labels;
    for (int i = 0; i < 40; ++i) {
        for (int j = 0; j < 5; ++j) {
            features(i, j) = rng.normal() * std::pow(10.0, static_cast<double>(j) - 2.0);
        }
        labels.push_back(i % 4);
    }
    features(3, 2) = 1e-300;
    features(5, 1) = -0.1;
    const auto data = make_dataset(features, labels, 4);
    std::stringstream buffer;
    write_feature_dataset(data, buffer);
    const auto again = read_feature_dataset(buffer);
    EXPECT_EQ(again.labels, data.labels);
    EXPECT_EQ(again.num_classes, data.num_classes);
    EXPECT_TRUE((again.features.array() == data.features.array()).all());
}

TEST(ClassProfile, SplitTags)
{
    const std::vector<std::size_t> counts{150, 50, 5};
    const auto profile = class_profile(counts, 100, 20);
    EXPECT_EQ(profile.splits, (std::vector<Split>{Split::many, Split::medium, Split::few}));
}

TEST(ClassProfile, BoundaryCountsAreMedium)
{
    const std::vector<std::size_t> counts{100, 20};
    const auto profile = class_profile(counts, 100, 20);
    EXPECT_EQ(profile.splits, (std::vector<Split>{Split::medium, Split::medium}));
    const std::vector<std::size_t> around{101, 99, 21, 19};
    EXPECT_EQ(class_profile(around).splits,
              (std::vector<Split>{Split::many, Split::medium, Split::medium, Split::few}));
}

TEST(ClassProfile, AllFew)
{
    const std::vector<std::size_t> counts{7, 7, 7};
    for (auto s : class_profile(counts).splits) {
        EXPECT_EQ(s, Split::few);
    }
}

TEST(ClassProfile, OrderIsDescendingAndStable)
{
    const std::vector<std::size_t> counts{3, 9, 3, 12};
    const auto profile = class_profile(counts);
    EXPECT_EQ(profile.order, (std::vector<int>{3, 1, 0, 2}));
    EXPECT_EQ(profile.sorted_counts(), (std::vector<std::size_t>{12, 9, 3, 3}));
    EXPECT_EQ(profile.total(), 27U);
}

TEST(Synthetic, ExponentialCountsSmallCase)
{
    SyntheticSpec spec;
    spec.num_classes = 3;
    spec.n_max = 8;
    spec.n_min = 2;
    EXPECT_EQ(longtail_counts(spec), (std::vector<std::size_t>{8, 4, 2}));
}

TEST(Synthetic, ExponentialCountsMatchOracle)
{
    SyntheticSpec spec;
    for (int classes : {2, 5, 50, 100}) {
        spec.num_classes = classes;
        EXPECT_EQ(longtail_counts(spec), exponential_oracle(classes, 500.0, 5.0)) << classes;
    }
}

TEST(Synthetic, DegenerateBalanced)
{
    SyntheticSpec spec;
    spec.n_max = 5;
    spec.n_min = 5;
    for (auto c : longtail_counts(spec)) {
        EXPECT_EQ(c, 5U);
    }
}

TEST(Synthetic, PowerLawEndpoints)
{
    SyntheticSpec spec;
    spec.decay = Decay::power_law;
    const auto counts = longtail_counts(spec);
    EXPECT_EQ(counts.front(), spec.n_max);
    EXPECT_EQ(counts.back(), spec.n_min);
    // n_j = n_max (j+1)^-alpha with alpha fixed by the endpoints.
    const double alpha = std::log(500.0 / 5.0) / std::log(50.0);
    EXPECT_EQ(counts[9], static_cast<std::size_t>(std::llround(500.0 * std::pow(10.0, -alpha))));
}

TEST(Synthetic, DeterministicInSeed)
{
    SyntheticSpec spec;
    spec.num_classes = 6;
    spec.n_max = 40;
    spec.dim = 8;
    spec.seed = 11;
    const auto a = generate_longtail(spec);
    const auto b = generate_longtail(spec);
    EXPECT_TRUE((a.train.features.array() == b.train.features.array()).all());
    EXPECT_EQ(a.train.labels, b.train.labels);
    EXPECT_TRUE((a.test.features.array() == b.test.features.array()).all());
    spec.seed = 12;
    const auto c = generate_longtail(spec);
    EXPECT_FALSE((a.train.features.array() == c.train.features.array()).all());
}

TEST(Synthetic, CentroidSeparation)
{
    SyntheticSpec spec;
    spec.num_classes = 5;
    spec.n_max = 4000;
    spec.n_min = 4000;
    spec.dim = 4;
    spec.class_separation = 3.0;
    spec.val_per_class = 0;
    spec.test_per_class = 0;
    const auto data = generate_longtail(spec);
    const auto members = data.train.class_members();
    Matrix means = Matrix::Zero(spec.dim, spec.num_classes);
    for (int c = 0; c < spec.num_classes; ++c) {
        for (auto i : members[static_cast<std::size_t>(c)]) {
            means.col(c) += data.train.features.row(static_cast<Eigen::Index>(i)).transpose();
        }
        means.col(c) /= static_cast<double>(members[static_cast<std::size_t>(c)].size());
    }
    double closest = 1e300;
    for (int a = 0; a < spec.num_classes; ++a) {
        for (int b = a + 1; b < spec.num_classes; ++b) {
            closest = std::min(closest, (means.col(a) - means.col(b)).norm());
        }
    }
    // Sample means carry O(1/sqrt(4000)) noise per coordinate.
    EXPECT_NEAR(closest, spec.class_separation, 0.15);
}

// Property: counts non-increasing within [n_min, n_max]; val/test balanced.
TEST(SyntheticProperty, CountsAndBalance)
{
    Rng rng(99);
    for (int trial = 0; trial < 40; ++trial) {
        SyntheticSpec spec;
        spec.num_classes = 1 + static_cast<int>(rng.below(30));
        spec.n_min = 1 + rng.below(20);
        spec.n_max = spec.n_min + rng.below(200);
        spec.decay = rng.below(2) == 0 ? Decay::exponential : Decay::power_law;
        spec.dim = 1 + static_cast<int>(rng.below(6));
        spec.val_per_class = rng.below(4);
        spec.test_per_class = 1 + rng.below(4);
        spec.seed = rng.next();
        const auto counts = longtail_counts(spec);
        ASSERT_EQ(counts.size(), static_cast<std::size_t>(spec.num_classes));
        for (std::size_t j = 0; j < counts.size(); ++j) {
            EXPECT_GE(counts[j], spec.n_min);
            EXPECT_LE(counts[j], spec.n_max);
            if (j > 0) {
                EXPECT_LE(counts[j], counts[j - 1]);
            }
        }
        const auto data = generate_longtail(spec);
        EXPECT_EQ(data.train.class_counts(), counts);
        for (auto c : data.test.class_counts()) {
            EXPECT_EQ(c, spec.test_per_class);
        }
        for (auto c : data.val.class_counts()) {
            EXPECT_EQ(c, spec.val_per_class);
        }
    }
}

TEST(SyntheticSpec, Validation)
{
    SyntheticSpec spec;
    spec.n_min = 0;
    EXPECT_THROW(spec.validate(), Error);
    spec = {};
    spec.n_max = 2;
    spec.n_min = 3;
    EXPECT_THROW(spec.validate(), Error);
    spec = {};
    spec.class_separation = 0.0;
    EXPECT_THROW(spec.validate(), Error);
    EXPECT_THROW(parse_decay("linear"), Error);
}

TEST(Rng, ReproducibleStreams)
{
    Rng a(5);
    Rng b(5);
    for (int i = 0; i < 100; ++i) {
        EXPECT_EQ(a.next(), b.next());
    }
    EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 3, 2));
    Rng c(1);
    for (int i = 0; i < 10000; ++i) {
        const double u = c.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        ASSERT_LT(c.below(7), 7U);
    }
}

TEST(Rng, NormalMoments)
{
    Rng rng(3);
    double sum = 0.0;
    double sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sq += x * x;
    }
    EXPECT_NEAR(sum / n, 0.0, 0.01);
    EXPECT_NEAR(sq / n, 1.0, 0.02);
}

} // namespace
