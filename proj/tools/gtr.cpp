#include "gtr/pipeline.hpp"

int main(int argc, char** argv) { return gtr::run_cli(argc, argv); }
