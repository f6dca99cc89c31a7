// Copyright 2026 The mrconv Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// mrconv: run layer stacks in regular, dilated or adaptive mode, build
// downsampling masks, report multiply-add costs and run the equivalence
// checks.
//
// Exit codes: 0 success, 1 failed checks, 2 file or parse error,
// 3 invalid argument or shape error.

#include <cstdio>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mrconv/io.h"
#include "mrconv/masks.h"
#include "mrconv/multires.h"
#include "mrconv/network.h"
#include "mrconv/verify.h"

namespace mrconv {
namespace {

constexpr int kExitChecksFailed = 1;
constexpr int kExitFileError = 2;
constexpr int kExitInvalidArgument = 3;

using nlohmann::ordered_json;

struct ModelArgs {
  std::string spec;
  std::string weights;
  std::string input;
  std::vector<std::string> masks;
};

struct RunArgs {
  ModelArgs model;
  std::string variant = "regular";
  int keep_last = -1;
  std::string out;
};

struct CostArgs {
  ModelArgs model;
  int keep_last = -1;
  std::string out;
};

struct MaskArgs {
  std::string input;
  std::string kps;
  std::string low;
  std::string high;
  std::string labels;
  int height = 0;
  int width = 0;
  double threshold = 0.35;
  std::vector<std::string> dilate{"11"};
  int factor = 2;
  int stages = 1;
  int offset_stride = 1;
  std::vector<std::string> out;
  std::vector<std::string> pgm;
};

struct VerifyArgs {
  std::string spec;
  std::string weights;
  std::string input;
  int trials = 100;
  std::uint64_t seed = 0;
  bool perturb_coarse = false;
  std::string json;
};

struct ToyArgs {
  std::uint64_t seed = 0;
  std::string spec = "toy.net";
  std::string weights = "toy.mrw";
  std::string input = "toy.mrt";
};

int parse_dilation(const std::string& text) {
  if (text == "inf" || text == "infinity") return kInfiniteDilation;
  std::size_t used = 0;
  int k = 0;
  try {
    k = std::stoi(text, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (used != text.size() || k < 0) {
    throw std::invalid_argument("dilation must be 0, a positive odd size or "
                                "'inf', got '" + text + "'");
  }
  return k;
}

std::vector<DownsampleMask> load_masks(const std::vector<std::string>& paths) {
  std::vector<DownsampleMask> masks;
  for (const auto& p : paths) masks.push_back(read_mask(p));
  return masks;
}

void write_json(const std::string& path, const ordered_json& doc) {
  const std::string text = doc.dump(2) + "\n";
  write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

// Prints a cost report and returns its JSON form.
ordered_json print_cost(const CostReport& report) {
  const std::string name(variant_name(report.variant));
  std::printf("variant %s total_ma=%llu reducer_ops=%llu", name.c_str(),
              static_cast<unsigned long long>(report.total_multiply_adds),
              static_cast<unsigned long long>(report.total_reducer_ops));
  if (report.variant == Variant::kDilated) {
    std::printf(" keep_last=%d", report.keep_last);
  }
  std::printf("\n");
  ordered_json items = ordered_json::array();
  for (const auto& item : report.items) {
    std::printf("  item %zu %-24s ma=%llu reducer_ops=%llu active=%llu/%llu\n",
                item.item, item.label.c_str(),
                static_cast<unsigned long long>(item.multiply_adds),
                static_cast<unsigned long long>(item.reducer_ops),
                static_cast<unsigned long long>(item.active_elements),
                static_cast<unsigned long long>(item.grid_elements));
    items.push_back({{"item", item.item},
                     {"label", item.label},
                     {"multiply_adds", item.multiply_adds},
                     {"reducer_ops", item.reducer_ops},
                     {"active_elements", item.active_elements},
                     {"grid_elements", item.grid_elements}});
  }
  ordered_json stages = ordered_json::array();
  for (const auto& s : report.stages) {
    std::printf("  stage %d patches=%llu downsampled=%llu active=%llu/%llu "
                "active_fraction=%.6f\n",
                s.stage, static_cast<unsigned long long>(s.patches),
                static_cast<unsigned long long>(s.downsampled_patches),
                static_cast<unsigned long long>(s.active_elements),
                static_cast<unsigned long long>(s.grid_elements),
                s.active_fraction());
    stages.push_back({{"stage", s.stage},
                      {"patches", s.patches},
                      {"downsampled_patches", s.downsampled_patches},
                      {"active_elements", s.active_elements},
                      {"grid_elements", s.grid_elements},
                      {"active_fraction", s.active_fraction()},
                      {"level_histogram", s.level_histogram}});
  }
  ordered_json doc;
  doc["variant"] = name;
  if (report.variant == Variant::kDilated) doc["keep_last"] = report.keep_last;
  doc["total_multiply_adds"] = report.total_multiply_adds;
  doc["total_reducer_ops"] = report.total_reducer_ops;
  doc["items"] = std::move(items);
  if (report.variant == Variant::kAdaptive) doc["stages"] = std::move(stages);
  return doc;
}

InputShape model_shape(const NetworkSpec& spec, const ModelArgs& args) {
  if (!args.input.empty()) {
    const DenseTensor t = read_image(args.input);
    return {t.height(), t.width(), t.channels()};
  }
  if (spec.input) return *spec.input;
  throw std::invalid_argument(
      "--input is required when the network spec has no input header");
}

int cmd_run(const RunArgs& args) {
  NetworkSpec spec = read_network_spec(args.model.spec);
  read_weights(args.model.weights, spec);
  const DenseTensor input = read_image(args.model.input);
  const Variant variant = parse_variant(args.variant);
  const InputShape shape{input.height(), input.width(), input.channels()};
  if (variant != Variant::kAdaptive && !args.model.masks.empty()) {
    throw std::invalid_argument("--mask is only valid with --variant adaptive");
  }
  VariantSpec vs;
  vs.kind = variant;
  vs.keep_last = args.keep_last;
  switch (variant) {
    case Variant::kRegular:
      write_tensor(args.out, run_regular(spec, input));
      break;
    case Variant::kDilated:
      write_tensor(args.out, run_dilated(spec, input, args.keep_last));
      break;
    case Variant::kAdaptive: {
      if (args.model.masks.empty() && spec.n_adaptive > 0) {
        throw std::invalid_argument(
            "--variant adaptive needs one --mask per adaptive stage (" +
            std::to_string(spec.n_adaptive) + ")");
      }
      vs.masks = load_masks(args.model.masks);
      const MultiResMap out = run_adaptive(spec, input, vs.masks);
      write_multires(args.out, out);
      break;
    }
  }
  print_cost(cost_report(spec, shape, vs));
  return 0;
}

int cmd_cost(const CostArgs& args) {
  NetworkSpec spec = read_network_spec(args.model.spec);
  if (!args.model.weights.empty()) read_weights(args.model.weights, spec);
  const InputShape shape = model_shape(spec, args.model);
  if (args.model.masks.size() != static_cast<std::size_t>(spec.n_adaptive)) {
    throw std::invalid_argument(
        "expected " + std::to_string(spec.n_adaptive) + " --mask file(s), got " +
        std::to_string(args.model.masks.size()));
  }
  ordered_json doc;
  doc["spec"] = spec.name;
  doc["input"] = {shape.height, shape.width, shape.channels};
  ordered_json variants = ordered_json::array();
  variants.push_back(print_cost(cost_report(spec, shape, VariantSpec::regular())));
  variants.push_back(
      print_cost(cost_report(spec, shape, VariantSpec::dilated(args.keep_last))));
  variants.push_back(print_cost(cost_report(
      spec, shape, VariantSpec::adaptive(load_masks(args.model.masks)))));
  doc["variants"] = std::move(variants);
  if (!args.out.empty()) write_json(args.out, doc);
  return 0;
}

void write_mask_outputs(const MaskArgs& args,
                        const std::vector<DownsampleMask>& masks) {
  if (args.out.size() != masks.size()) {
    throw std::invalid_argument("expected " + std::to_string(masks.size()) +
                                " --out file(s), one per stage");
  }
  if (!args.pgm.empty() && args.pgm.size() != masks.size()) {
    throw std::invalid_argument("expected " + std::to_string(masks.size()) +
                                " --pgm file(s), one per stage");
  }
  for (std::size_t s = 0; s < masks.size(); ++s) {
    write_mask(args.out[s], masks[s]);
    if (!args.pgm.empty()) write_mask_pgm(args.pgm[s], masks[s]);
    std::printf("stage %zu mask %dx%d downsampled=%zu fraction=%.6f -> %s\n",
                s + 1, masks[s].rows(), masks[s].cols(), masks[s].count_ones(),
                masks[s].active_fraction(), args.out[s].c_str());
  }
}

void check_mask_args(const MaskArgs& args) {
  if (args.factor < 2) throw std::invalid_argument("--d must be >= 2");
  if (args.stages < 1) throw std::invalid_argument("--stages must be >= 1");
  if (args.offset_stride < 1) {
    throw std::invalid_argument("--offset-stride must be >= 1");
  }
}

// Dilation for stage s: one value for all stages or one per stage.
int stage_dilation_arg(const MaskArgs& args, int s) {
  if (args.dilate.size() == 1) return parse_dilation(args.dilate[0]);
  if (args.dilate.size() != static_cast<std::size_t>(args.stages)) {
    throw std::invalid_argument("--dilate takes one value or one per stage");
  }
  return parse_dilation(args.dilate[s]);
}

// Pools an input-resolution importance map to the mask grid of each stage.
std::vector<DownsampleMask> pool_stages(
    const MaskArgs& args, const std::function<BinaryMap(int stage)>& important) {
  std::vector<DownsampleMask> masks;
  int patch = args.offset_stride;
  for (int s = 0; s < args.stages; ++s) {
    patch = patch * args.factor;
    masks.push_back(pool_retain_any(important(s), patch));
  }
  return masks;
}

int cmd_mask_edge(const MaskArgs& args) {
  check_mask_args(args);
  const DenseTensor gray = read_image(args.input);
  if (gray.channels() != 1) {
    throw std::invalid_argument("edge masks need a single-channel image");
  }
  write_mask_outputs(args, pool_stages(args, [&](int s) {
                       const int k = stage_dilation_arg(args, s);
                       if (k == kInfiniteDilation) {
                         throw std::invalid_argument(
                             "edge masks need a finite dilation");
                       }
                       return edge_importance(gray, args.threshold, k);
                     }));
  return 0;
}

int cmd_mask_keypoints(const MaskArgs& args) {
  check_mask_args(args);
  int height = args.height;
  int width = args.width;
  if (!args.input.empty()) {
    const DenseTensor t = read_image(args.input);
    height = t.height();
    width = t.width();
  }
  if (height <= 0 || width <= 0) {
    throw std::invalid_argument("give --input or positive --height/--width");
  }
  const KeypointSet kps = read_keypoints(args.kps);
  write_mask_outputs(args, pool_stages(args, [&](int s) {
                       return keypoint_importance(
                           kps, stage_dilation_arg(args, s), height, width);
                     }));
  return 0;
}

int cmd_mask_oracle(const MaskArgs& args) {
  check_mask_args(args);
  const LabelMap low = read_label_map(args.low);
  const LabelMap high = read_label_map(args.high);
  const LabelMap labels = read_label_map(args.labels);
  const BinaryMap benefit = benefit_set(low, high, labels);
  write_mask_outputs(args, pool_stages(args, [&](int s) {
                       const int k = stage_dilation_arg(args, s);
                       if (k == kInfiniteDilation || k == 0) {
                         throw std::invalid_argument(
                             "oracle masks need a positive odd dilation");
                       }
                       return dilate_binary(benefit, k);
                     }));
  return 0;
}

int cmd_verify(const VerifyArgs& args) {
  if (args.trials <= 0) throw std::invalid_argument("--trials must be >= 1");
  Rng rng(args.seed);
  NetworkSpec spec;
  DenseTensor input;
  if (args.spec.empty()) {
    if (!args.weights.empty() || !args.input.empty()) {
      throw std::invalid_argument("--weights and --input need --spec");
    }
    ToyCase toy = random_toy_case(rng);
    spec = std::move(toy.spec);
    input = std::move(toy.input);
  } else {
    spec = read_network_spec(args.spec);
    if (args.weights.empty()) {
      randomize_weights(spec, rng);
    } else {
      read_weights(args.weights, spec);
    }
    if (!args.input.empty()) {
      input = read_image(args.input);
    } else if (spec.input) {
      input = random_input(*spec.input, rng);
    } else {
      throw std::invalid_argument(
          "--input is required when the network spec has no input header");
    }
  }
  spec.validate_input({input.height(), input.width(), input.channels()});

  Report report = check_endpoint_equivalences(spec, input);
  Guarantee2Options g2;
  g2.trials = args.trials;
  g2.seed = args.seed;
  g2.perturb_coarse = args.perturb_coarse;
  report.merge(check_guarantee2(
      spec, input,
      cycling_sampler({MaskKind::kBernoulli, MaskKind::kCheckerboard,
                       MaskKind::kSingleRetained, MaskKind::kInvertedBernoulli,
                       MaskKind::kOnes}),
      g2));

  // Impulse sweeps cost one run per input pixel; keep them to small inputs.
  constexpr int kMaxSweepPixels = 64 * 64;
  if (input.height() * input.width() <= kMaxSweepPixels) {
    std::vector<std::vector<DownsampleMask>> mask_sets;
    for (int i = 0; i < std::min(args.trials, 5); ++i) {
      mask_sets.push_back(sample_masks(spec, input.height(), input.width(),
                                       MaskKind::kBernoulli, rng));
    }
    report.merge(
        check_guarantee1(spec, input.height(), input.width(), mask_sets));
    report.merge(
        check_guarantee1_dilated(spec, input.height(), input.width()));
  } else {
    std::fprintf(stderr,
                 "mrconv: note: input larger than %d pixels, receptive-field "
                 "sweeps not run\n",
                 kMaxSweepPixels);
  }

  std::fputs(report.to_text().c_str(), stdout);
  if (!args.json.empty()) {
    const std::string text = report.to_json();
    write_file_bytes(args.json,
                     std::vector<std::uint8_t>(text.begin(), text.end()));
  }
  return report.passed() ? 0 : kExitChecksFailed;
}

int cmd_make_toy(const ToyArgs& args) {
  Rng rng(args.seed);
  const ToyCase toy = random_toy_case(rng);
  write_network_spec(args.spec, toy.spec);
  write_weights(args.weights, toy.spec);
  write_tensor(args.input, toy.input);
  std::printf("%s", format_network_spec(toy.spec).c_str());
  return 0;
}

void add_model_options(CLI::App* cmd, ModelArgs& m, bool need_input) {
  cmd->add_option("--spec", m.spec, "Network spec file")->required();
  auto* in = cmd->add_option("--input", m.input, "Input tensor (MRT1 or PGM)");
  if (need_input) {
    cmd->add_option("--weights", m.weights, "Weights file (MRW1)")->required();
    in->required();
  } else {
    cmd->add_option("--weights", m.weights, "Weights file (MRW1)");
  }
  cmd->add_option("--mask", m.masks, "Mask file (MSK1), one per stage");
}

void add_mask_common(CLI::App* cmd, MaskArgs& a) {
  cmd->add_option("--dilate", a.dilate,
                  "Square dilation size, 0 or 'inf'; one value or one per stage");
  cmd->add_option("--d", a.factor, "Downsampling factor");
  cmd->add_option("--stages", a.stages, "Number of adaptive stages");
  cmd->add_option("--offset-stride", a.offset_stride,
                  "Stride of the regular downsamplings before the first "
                  "adaptive stage");
  cmd->add_option("--out", a.out, "Output mask (MSK1), one per stage")
      ->required();
  cmd->add_option("--pgm", a.pgm, "PGM visualization, one per stage");
}

int run_main(int argc, char** argv) {
  CLI::App app{"Content-adaptive multi-resolution convolution toolkit",
               "mrconv"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run one network variant");
  add_model_options(run_cmd, run.model, true);
  run_cmd->add_option("--variant", run.variant, "regular|dilated|adaptive");
  run_cmd->add_option("--keep-last", run.keep_last,
                      "Downsamplings removed by the dilated variant "
                      "(default n_adaptive)");
  run_cmd->add_option("--out", run.out, "Output (MRT1, or MRM1 if adaptive)")
      ->required();

  CostArgs cost;
  auto* cost_cmd =
      app.add_subcommand("cost", "Multiply-add counts of all three variants");
  add_model_options(cost_cmd, cost.model, false);
  cost_cmd->add_option("--keep-last", cost.keep_last,
                       "Downsamplings removed by the dilated variant");
  cost_cmd->add_option("--out", cost.out, "JSON summary");

  MaskArgs mask;
  auto* mask_cmd = app.add_subcommand("mask", "Build downsampling masks");
  mask_cmd->require_subcommand(1);
  auto* edge_cmd = mask_cmd->add_subcommand("edge", "Edge-based mask");
  edge_cmd->add_option("--input", mask.input, "Grayscale image (PGM or MRT1)")
      ->required();
  edge_cmd->add_option("--threshold", mask.threshold,
                       "Normalized Sobel threshold in [0, 1]");
  add_mask_common(edge_cmd, mask);
  auto* kp_cmd = mask_cmd->add_subcommand("keypoints", "Keypoint-based mask");
  kp_cmd->add_option("--kps", mask.kps, "Keypoint file")->required();
  kp_cmd->add_option("--input", mask.input, "Image giving the grid size");
  kp_cmd->add_option("--height", mask.height, "Grid height");
  kp_cmd->add_option("--width", mask.width, "Grid width");
  add_mask_common(kp_cmd, mask);
  auto* oracle_cmd =
      mask_cmd->add_subcommand("oracle", "Mask from prediction label maps");
  oracle_cmd->add_option("--low", mask.low, "Low-resolution prediction")
      ->required();
  oracle_cmd->add_option("--high", mask.high, "High-resolution prediction")
      ->required();
  oracle_cmd->add_option("--labels", mask.labels, "Ground-truth labels")
      ->required();
  add_mask_common(oracle_cmd, mask);

  VerifyArgs verify;
  auto* verify_cmd =
      app.add_subcommand("verify", "Run the equivalence checks");
  verify_cmd->add_option("--spec", verify.spec,
                         "Network spec (default: random toy spec)");
  verify_cmd->add_option("--weights", verify.weights, "Weights file");
  verify_cmd->add_option("--input", verify.input, "Input tensor");
  verify_cmd->add_option("--trials", verify.trials, "Random mask trials");
  verify_cmd->add_option("--seed", verify.seed, "Random seed");
  verify_cmd->add_flag("--perturb-coarse", verify.perturb_coarse,
                       "Corrupt the adaptive weights (negative control)");
  verify_cmd->add_option("--json", verify.json, "JSON summary");

  ToyArgs toy;
  auto* toy_cmd =
      app.add_subcommand("make-toy", "Write a random toy spec, weights, input");
  toy_cmd->add_option("--seed", toy.seed, "Random seed");
  toy_cmd->add_option("--spec", toy.spec, "Spec output");
  toy_cmd->add_option("--weights", toy.weights, "Weights output");
  toy_cmd->add_option("--input", toy.input, "Input output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalidArgument;
  }

  if (*run_cmd) return cmd_run(run);
  if (*cost_cmd) return cmd_cost(cost);
  if (*edge_cmd) return cmd_mask_edge(mask);
  if (*kp_cmd) return cmd_mask_keypoints(mask);
  if (*oracle_cmd) return cmd_mask_oracle(mask);
  if (*verify_cmd) return cmd_verify(verify);
  if (*toy_cmd) return cmd_make_toy(toy);
  return kExitInvalidArgument;
}

}  // namespace
}  // namespace mrconv

int main(int argc, char** argv) {
  try {
    return mrconv::run_main(argc, argv);
  } catch (const mrconv::FileError& e) {
    std::fprintf(stderr, "mrconv: error: %s\n", e.what());
    return mrconv::kExitFileError;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "mrconv: error: %s\n", e.what());
    return mrconv::kExitInvalidArgument;
  } catch (const std::out_of_range& e) {
    std::fprintf(stderr, "mrconv: error: %s\n", e.what());
    return mrconv::kExitInvalidArgument;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "mrconv: internal error: %s\n", e.what());
    return 4;
  }
}
