#ifndef POTGAM_CLI_HPP
#define POTGAM_CLI_HPP

namespace potgam::cli {

/// Exit codes: 0 success, 1 error, 2 fit did not converge (model still
/// written), 3 verification band failure (report still written).
int run(int argc, const char* const* argv);

}  // namespace potgam::cli

#endif
