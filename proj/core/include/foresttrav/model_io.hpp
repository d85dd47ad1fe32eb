#pragma once

#include <string>
#include <vector>

#include "foresttrav/unet.hpp"

namespace foresttrav {

// Binary model archive, magic "FTNN": architecture descriptor, input
// normalization stats, then every parameter and running-stat tensor by name.
// Round trips are bit-exact.
void save_model(UNetModel& model, const std::string& path);
UNetModel load_model(const std::string& path);

// Per-epoch training curve as CSV: epoch,train_loss,val_loss,seconds.
void write_training_log(const std::vector<EpochStats>& log,
                        const std::string& path);

}  // namespace foresttrav
