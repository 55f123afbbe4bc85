#pragma once

#include "ipll/datagen.hpp"
#include "ipll/trainer.hpp"

#include <iosfwd>
#include <string>

namespace ipll {

/// Dataset plus stream parameters for the `gen` subcommand.
struct GenSpec {
  DatasetSpec dataset;
  StreamSpec stream;
};

// Flat `key = value` files; '#' starts a comment, blank lines are ignored,
// unknown keys are an error.  Every key is optional and falls back to the
// documented default.
GenSpec parse_gen_spec(std::istream& is);
GenSpec load_gen_spec_file(const std::string& path);

/// Trainer configuration.  The IPLL_SEED environment variable, when set,
/// overrides the `seed` key.
PGDRConfig parse_run_config(std::istream& is);
PGDRConfig load_run_config_file(const std::string& path);

}  // namespace ipll
