#include "test_main.hpp"

#include <cmath>

#include "ntssl/checkpoint.hpp"
#include "ntssl/config.hpp"
#include "ntssl/error.hpp"
#include "test_util.hpp"

using namespace ntssl;
using nlohmann::json;

TEST_CASE("run config round-trips through json") {
  RunConfig c;
  c.synth.num_videos = 7;
  c.synth.attr_margin = 0.25;
  c.builder.chain_by = ChainBy::track;
  c.encoder.num_layers = 2;
  c.loss.level = Level::frame;
  c.loss.frame_pairing = FramePairing::aligned;
  c.train.sampling = Sampling::topk;
  c.train.curriculum = false;
  c.train.schedule.tau_max = 9.5;
  c.train.seed = 123456789012345ULL;
  c.probe.split_seed = 3;
  const json j = to_json(c);
  const RunConfig back = run_config_from_json(j);
  CHECK(to_json(back) == j);
  CHECK(back.encoder == c.encoder);
  CHECK(back.train.seed == c.train.seed);
  // And once more through text.
  CHECK(to_json(run_config_from_json(json::parse(j.dump()))) == j);
}

TEST_CASE("partial configs overlay the defaults") {
  const RunConfig c = run_config_from_json(json::parse(R"({"train": {"K": 3, "schedule": {"tau_min": 0.5}}})"));
  CHECK(c.train.K == 3);
  CHECK(c.train.schedule.tau_min == 0.5);
  CHECK(c.train.schedule.tau_max == 12.0);
  CHECK(c.train.batch_size == 60);
  CHECK(to_json(c.synth) == to_json(SynthConfig{}));
}

TEST_CASE("unknown keys and bad values are usage errors") {
  CHECK_THROWS_WITH_AS(run_config_from_json(json::parse(R"({"train": {"stepz": 3}})")),
                       doctest::Contains("train.stepz"), UsageError);
  CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"model": {}})")), UsageError);
  CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"train": {"K": "four"}})")), UsageError);
  CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"loss": {"level": "clip"}})")), UsageError);
  CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"encoder": {"d_in": 5}})")), UsageError);
}

TEST_CASE("config files") {
  TempDir dir;
  CHECK_THROWS_AS(load_run_config(dir.path() / "missing.json"), UsageError);
  write_file(dir.path() / "bad.json", "{ not json");
  CHECK_THROWS_AS(load_run_config(dir.path() / "bad.json"), UsageError);
  write_file(dir.path() / "ok.json", R"({"synth": {"seed": 9}})");
  CHECK(load_run_config(dir.path() / "ok.json").synth.seed == 9);
}

TEST_CASE("checkpoint round-trips bit for bit") {
  TempDir dir;
  EncoderConfig e;
  e.d_in = 5;
  e.d_model = 8;
  e.num_heads = 2;
  Checkpoint ck{e, init_params(e, 42), json{{"note", "x"}}};
  ck.params.value("enc.in.W")[0] = 1.0 / 3.0;
  ck.params.value("enc.in.W")[1] = -0.0;
  ck.params.value("enc.in.W")[2] = 5e-324;
  const auto p = dir.path() / "a.ckpt";
  save_checkpoint(ck, p);
  const Checkpoint back = load_checkpoint(p);
  CHECK(back.encoder == e);
  CHECK(back.params == ck.params);
  CHECK(back.config_echo == ck.config_echo);
  CHECK(std::signbit(back.params.value("enc.in.W")[1]));
  save_checkpoint(back, dir.path() / "b.ckpt");
  CHECK(read_file(p) == read_file(dir.path() / "b.ckpt"));
}

TEST_CASE("damaged checkpoints are rejected") {
  TempDir dir;
  EncoderConfig e;
  const auto p = dir.path() / "a.ckpt";
  save_checkpoint({e, init_params(e, 1), json::object()}, p);
  const std::string bytes = read_file(p);

  write_file(dir.path() / "trunc.ckpt", bytes.substr(0, bytes.size() - 8));
  CHECK_THROWS_WITH_AS(load_checkpoint(dir.path() / "trunc.ckpt"), doctest::Contains("truncated"), MismatchError);
  write_file(dir.path() / "empty.ckpt", "");
  CHECK_THROWS_AS(load_checkpoint(dir.path() / "empty.ckpt"), MismatchError);
  write_file(dir.path() / "junk.ckpt", "{\"format\": 1\n");
  CHECK_THROWS_AS(load_checkpoint(dir.path() / "junk.ckpt"), MismatchError);
  CHECK_THROWS_AS(load_checkpoint(dir.path() / "none.ckpt"), UsageError);
}
