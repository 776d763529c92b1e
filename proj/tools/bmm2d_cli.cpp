#include "bmm2d/cli.hpp"

int main(int argc, char** argv) { return bmm2d::cli::dispatch(argc, argv); }
