#include <doctest.h>

#include <random>

#include "saeprobe/activation.hpp"
#include "saeprobe/error.hpp"
#include "test_helpers.hpp"

using namespace saeprobe;
using testing_support::make_record;
using testing_support::toy_target;

TEST_CASE("shipped registry lists the nine SAE configurations") {
  const auto registry = TargetRegistry::load(default_run_config().registry_path);
  CHECK(registry.targets().size() == 9);
  CHECK(registry.require({"gpt2-small", "res-jb"}).feature_count == 24576);
  CHECK(registry.require({"gemma-2-9b-it", "gemmascope-res-131k"}).feature_count == 131072);
  CHECK(registry.require({"llama3.1-8b", "llamascope-res-32k"}).feature_count == 32768);
  CHECK(registry.select("gemma-2-2b").size() == 3);
  CHECK(registry.select("all").size() == 9);
  CHECK_THROWS_AS(registry.require({"gpt2-small", "nope"}), Error);
  try {
    registry.select("mistral");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::configuration);
  }
}

TEST_CASE("registry rejects duplicates") {
  TargetRegistry registry;
  registry.add(toy_target());
  try {
    registry.add(toy_target());
    FAIL("expected conflict");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::conflict);
  }
}

TEST_CASE("canonicalize orders, quantizes and truncates") {
  const auto target = toy_target();
  ActivationRecord record = make_record(target, "c", {5, 3, 9, 1});
  record.features[0].activation_value = 1.0;
  record.features[1].activation_value = 7.1234567891;
  record.features[2].activation_value = 7.1234567;
  record.features[3].activation_value = 2.0;
  canonicalize(record, 3);
  REQUIRE(record.features.size() == 3);
  // 7.1234567891 and 7.1234567 quantize to the same value; ties go to the lower index.
  CHECK(record.features[0].key.index == 3);
  CHECK(record.features[1].key.index == 9);
  CHECK(record.features[0].activation_value == record.features[1].activation_value);
  CHECK(record.features[2].key.index == 1);
  CHECK(satisfies_ordering(record));
}

TEST_CASE("canonicalize rejects invalid features") {
  const auto target = toy_target(10);
  auto expect_validation = [](ActivationRecord r) {
    try {
      canonicalize(r);
      FAIL("expected validation error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::validation);
    }
  };
  expect_validation(make_record(target, "c", {1, 1}));
  expect_validation(make_record(target, "c", {10}));
  ActivationRecord negative = make_record(target, "c", {1});
  negative.features[0].activation_value = -1;
  expect_validation(negative);
  ActivationRecord foreign = make_record(target, "c", {1});
  foreign.features[0].key.target = {"other", "x"};
  expect_validation(foreign);
}

TEST_CASE("record JSON round trip") {
  std::mt19937_64 rng(3);
  const auto target = toy_target();
  for (int i = 0; i < 50; ++i) {
    ActivationRecord record = testing_support::random_record(rng, target, 20, 1000);
    record.features[0].top_texts = {"first text", "ünïcode – text"};
    record.provenance = Provenance::cache;
    canonicalize(record);
    const ActivationRecord back = record_from_json(nlohmann::json::parse(canonical_dump(to_json(record))));
    CHECK(back == record);
  }
}

TEST_CASE("quantization keeps six significant digits") {
  CHECK(quantize_activation(12.3456789) == doctest::Approx(12.3457).epsilon(1e-12));
  CHECK(quantize_activation(0.000123456789) == doctest::Approx(0.000123457).epsilon(1e-12));
  CHECK(quantize_activation(quantize_activation(3.14159265)) == quantize_activation(3.14159265));
}
