#include "latentbridge/cli/app.hpp"

int main(int argc, char** argv) { return latentbridge::cli::dispatch(argc, argv); }
