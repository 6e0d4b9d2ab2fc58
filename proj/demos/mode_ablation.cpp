// Trains every fusion mode on the synthetic reconstruction task and prints a
// table of parameter count, loss before and after training, and multiplies
// spent in one forward pass.

#include <cstdio>

#include "dmff/all.hpp"

int main() {
  using namespace dmff;
  const FusionMode modes[] = {FusionMode::kA, FusionMode::kB,    FusionMode::kC,       FusionMode::kD,
                              FusionMode::kE, FusionMode::kFRgb, FusionMode::kFThermal};
  std::printf("%-10s %8s %12s %12s %10s\n", "mode", "params", "init loss", "final loss", "mults");
  for (auto mode : modes) {
    TrainConfig cfg;
    cfg.dmff.mode = mode;
    const auto res = train_toy<float>(cfg);

    const auto sample = make_dataset<float>(cfg).front();
    MulTally tally;
    {
      ScopedTally scope(tally);
      dmff_fuse(sample.rgb, sample.thermal, cfg.dmff, res.weights);
    }
    std::printf("%-10s %8zu %12.5f %12.5f %10llu\n", std::string(to_string(mode)).c_str(), param_count(res.weights),
                res.trace.front().loss, res.final_loss, static_cast<unsigned long long>(tally.total()));
  }
  return 0;
}
