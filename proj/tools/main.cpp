#include "potgam/cli.hpp"

int main(int argc, char** argv) { return potgam::cli::run(argc, argv); }
