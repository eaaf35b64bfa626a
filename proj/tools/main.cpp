#include "cli.hpp"

int main(int argc, char** argv) { return mprof::cli::dispatch(argc, argv); }
