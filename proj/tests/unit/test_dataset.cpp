#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cascadex/dataset.hpp"
#include "cascadex/error.hpp"
#include "cascadex/rng.hpp"

namespace {

using namespace cascadex;

Dataset parse(const std::string& text, DatasetFormat format = DatasetFormat::jsonl_features,
              LoadOptions options = {}) {
    std::istringstream in(text);
    return read_dataset(in, format, options);
}

Dataset labelled(const std::vector<std::size_t>& labels, std::size_t num_classes = 2) {
    std::vector<Instance> items;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        items.push_back({"i" + std::to_string(i), {static_cast<double>(i)}, labels[i], std::nullopt});
    }
    return Dataset(std::move(items), num_classes, 1);
}

double norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) {
        s += x * x;
    }
    return std::sqrt(s);
}

TEST(LoadDataset, ReadsFeatureRecords) {
    const Dataset d = parse(
        R"({"id": "a", "label": 0, "features": [1, 2, 3, 4]})"
        "\n"
        R"({"id": "b", "label": 1, "features": [0.5, 0, 0, 1]})"
        "\n\n"
        R"({"id": "c", "label": 1, "features": [0, 0, 0, 0], "difficulty": 1})"
        "\n");
    EXPECT_EQ(d.size(), 3u);
    EXPECT_EQ(d.feature_dim(), 4u);
    EXPECT_EQ(d.num_classes(), 2u);
    EXPECT_EQ(d[1].features[0], 0.5);
    EXPECT_FALSE(d[0].difficulty.has_value());
    EXPECT_EQ(d[2].difficulty, 1);
}

TEST(LoadDataset, EmptyInputIsAnError) {
    try {
        parse("");
        FAIL() << "expected an error";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("empty dataset"), std::string::npos);
    }
}

TEST(LoadDataset, LabelOutOfRangeNamesTheRecord) {
    LoadOptions options;
    options.num_classes = 2;
    try {
        parse(R"({"id": "ok", "label": 1, "features": [1]})"
              "\n"
              R"({"id": "bad-one", "label": 5, "features": [1]})",
              DatasetFormat::jsonl_features, options);
        FAIL() << "expected a schema error";
    } catch (const SchemaError& e) {
        EXPECT_NE(std::string(e.what()).find("bad-one"), std::string::npos);
    }
}

TEST(LoadDataset, MalformedLineReportsLineNumber) {
    try {
        parse(R"({"id": "a", "label": 0, "features": [1]})"
              "\n"
              "{not json\n");
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
    EXPECT_THROW(parse(R"({"id": "a", "features": [1]})"), ParseError);
}

TEST(LoadDataset, InconsistentDimensionIsSchemaError) {
    EXPECT_THROW(parse(R"({"id": "a", "label": 0, "features": [1, 2]})"
                       "\n"
                       R"({"id": "b", "label": 0, "features": [1]})"),
                 SchemaError);
}

TEST(LoadDataset, DuplicateIdsRejected) {
    EXPECT_THROW(parse(R"({"id": "a", "label": 0, "features": [1]})"
                       "\n"
                       R"({"id": "a", "label": 1, "features": [2]})"),
                 SchemaError);
}

TEST(LoadDataset, TextRecordsAreHashed) {
    LoadOptions options;
    options.text_dim = 16;
    const Dataset d = parse(R"({"id": "t", "label": 1, "text": "Good Movie"})", DatasetFormat::jsonl_text, options);
    EXPECT_EQ(d.feature_dim(), 16u);
    EXPECT_EQ(d[0].features, hash_featurize("good movie", 16));
}

TEST(LoadDataset, SaveThenLoadIsBitIdentical) {
    Rng rng(99);
    std::vector<Instance> items;
    for (int i = 0; i < 50; ++i) {
        Instance inst{"r" + std::to_string(i), {}, rng.below(3), std::nullopt};
        for (int j = 0; j < 5; ++j) {
            inst.features.push_back(rng.normal() * std::pow(10.0, static_cast<double>(rng.below(9)) - 4.0));
        }
        if (i % 3 == 0) {
            inst.difficulty = static_cast<int>(rng.below(2));
        }
        items.push_back(std::move(inst));
    }
    const Dataset original(items, 3, 5);
    const auto path = std::filesystem::temp_directory_path() / "cascadex_roundtrip.jsonl";
    save_dataset(original, path);
    LoadOptions options;
    options.num_classes = 3;
    const Dataset reloaded = load_dataset(path, DatasetFormat::jsonl_features, options);
    std::filesystem::remove(path);
    ASSERT_EQ(reloaded.size(), original.size());
    for (std::size_t i = 0; i < original.size(); ++i) {
        EXPECT_EQ(reloaded[i], original[i]) << "record " << i;
    }
}

TEST(HashFeaturize, EmptyTextIsZero) {
    EXPECT_EQ(hash_featurize("", 8), std::vector<double>(8, 0.0));
    EXPECT_EQ(hash_featurize("   \t ", 8), std::vector<double>(8, 0.0));
}

TEST(HashFeaturize, RepeatedTokenHasOneUnitBucket) {
    const auto v = hash_featurize("a a", 8);
    int nonzero = 0;
    for (double x : v) {
        if (x != 0.0) {
            ++nonzero;
            EXPECT_DOUBLE_EQ(std::abs(x), 1.0);
        }
    }
    EXPECT_EQ(nonzero, 1);
}

// FNV-1a 64 evaluated by hand (independently in Python):
//   "good"  = 0x9ce4d6720e9c9118 -> bucket 8 of 16, bit 63 set   -> -1
//   "movie" = 0x2703fa92fbc5c30f -> bucket 15 of 16, bit 63 clear -> +1
TEST(HashFeaturize, GoldenBuckets) {
    EXPECT_EQ(token_hash("good"), 0x9ce4d6720e9c9118ULL);
    EXPECT_EQ(token_hash("movie"), 0x2703fa92fbc5c30fULL);
    const auto v = hash_featurize("good movie", 16);
    const double h = 1.0 / std::sqrt(2.0);
    for (std::size_t i = 0; i < 16; ++i) {
        const double expected = i == 8 ? -h : (i == 15 ? h : 0.0);
        EXPECT_NEAR(v[i], expected, 1e-15) << "bucket " << i;
    }
}

TEST(HashFeaturize, UnitNormForAnyNonEmptyText) {
    Rng rng(5);
    const std::string alphabet = "abcdefgh";
    for (int trial = 0; trial < 200; ++trial) {
        std::string text;
        const std::size_t words = 1 + rng.below(12);
        for (std::size_t w = 0; w < words; ++w) {
            const std::size_t len = 1 + rng.below(4);
            for (std::size_t c = 0; c < len; ++c) {
                text += alphabet[rng.below(alphabet.size())];
            }
            text += ' ';
        }
        const auto v = hash_featurize(text, 1 + rng.below(32));
        const double n = norm(v);
        // Opposite-signed collisions can cancel to the zero vector.
        EXPECT_TRUE(std::abs(n - 1.0) < 1e-9 || n == 0.0) << text;
    }
}

TEST(AssignFolds, BalancedTwoClassesTwoFolds) {
    const Dataset d = labelled({0, 1, 0, 1, 0, 1, 0, 1});
    const FoldAssignment f = assign_folds(d, 2, 3);
    for (std::size_t fold = 0; fold < 2; ++fold) {
        std::map<std::size_t, int> counts;
        for (std::size_t p : f.members(fold)) {
            ++counts[d[p].label];
        }
        EXPECT_EQ(counts[0], 2);
        EXPECT_EQ(counts[1], 2);
    }
}

TEST(AssignFolds, Deterministic) {
    const Dataset d = labelled({0, 1, 1, 0, 2, 2, 1, 0, 0, 1, 2}, 3);
    EXPECT_EQ(assign_folds(d, 3, 17), assign_folds(d, 3, 17));
}

TEST(AssignFolds, ImbalancedTenIntoEight) {
    const Dataset d = labelled({0, 0, 0, 0, 0, 0, 0, 1, 1, 1});
    const FoldAssignment f = assign_folds(d, 8, 11);
    // Brute-force count over the produced assignment.
    std::vector<std::array<int, 2>> counts(8, {0, 0});
    for (std::size_t i = 0; i < d.size(); ++i) {
        ASSERT_LT(f.fold_of[i], 8u);
        ++counts[f.fold_of[i]][d[i].label];
    }
    int total0 = 0, total1 = 0;
    for (const auto& c : counts) {
        EXPECT_GE(c[0] + c[1], 1) << "empty fold";
        EXPECT_LE(std::abs(c[0] - 7.0 / 8.0), 1.0);
        EXPECT_LE(std::abs(c[1] - 3.0 / 8.0), 1.0);
        total0 += c[0];
        total1 += c[1];
    }
    EXPECT_EQ(total0, 7);
    EXPECT_EQ(total1, 3);
}

TEST(AssignFolds, RejectsBadK) {
    const Dataset d = labelled({0, 1, 0});
    EXPECT_THROW(assign_folds(d, 4, 0), ValidationError);
    EXPECT_THROW(assign_folds(d, 1, 0), ValidationError);
}

TEST(AssignFolds, PartitionAndStratificationProperty) {
    Rng rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t classes = 2 + rng.below(4);
        const std::size_t n = 10 + rng.below(90);
        std::vector<std::size_t> labels(n);
        for (auto& l : labels) {
            // Skewed class mix.
            l = std::min(classes - 1, rng.below(classes * 2) / 2 + (rng.below(3) == 0 ? 1 : 0));
        }
        const Dataset d = labelled(labels, classes);
        const std::size_t k = 2 + rng.below(std::min<std::size_t>(n - 1, 9));
        const FoldAssignment f = assign_folds(d, k, rng.next());

        std::vector<std::size_t> seen;
        for (std::size_t fold = 0; fold < k; ++fold) {
            const auto members = f.members(fold);
            EXPECT_FALSE(members.empty());
            seen.insert(seen.end(), members.begin(), members.end());
            std::vector<double> per_class(classes, 0.0);
            for (std::size_t p : members) {
                per_class[d[p].label] += 1.0;
            }
            for (std::size_t c = 0; c < classes; ++c) {
                const double share = static_cast<double>(std::count(labels.begin(), labels.end(), c)) / k;
                EXPECT_LE(std::abs(per_class[c] - share), 1.0);
            }
        }
        std::sort(seen.begin(), seen.end());
        ASSERT_EQ(seen.size(), n);
        for (std::size_t i = 0; i < n; ++i) {
            EXPECT_EQ(seen[i], i);
        }
    }
}

}  // namespace
