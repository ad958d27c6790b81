#include "odofuse/cli.hpp"

int main(int argc, char** argv) { return odofuse::cli::dispatch(argc, argv); }
