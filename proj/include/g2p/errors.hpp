#pragma once

#include <stdexcept>
#include <string>

namespace g2p {

/// Invalid configuration, parameters, or on-disk artifacts. CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The simulated plant reached a non-finite or unusable state. CLI exit code 3.
class PlantFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training diverged (non-finite loss or parameters). CLI exit code 4.
class TrainingFault : public std::runtime_error {
 public:
  TrainingFault(const std::string& msg, int epoch, int batch)
      : std::runtime_error(msg), epoch(epoch), batch(batch) {}
  int epoch;
  int batch;
};

}  // namespace g2p
