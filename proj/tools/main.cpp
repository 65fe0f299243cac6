#include "ufp/cli.hpp"

int main(int argc, char** argv) { return ufp::cli_main(argc, argv); }
