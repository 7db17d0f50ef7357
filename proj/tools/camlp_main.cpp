#include "camlp/cli.hpp"

int main(int argc, char** argv) { return camlp::run_command(argc, argv); }
