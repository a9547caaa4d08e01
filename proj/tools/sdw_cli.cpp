#include "sdw/cli.hpp"

int main(int argc, char** argv) { return sdw::cli_main(argc, argv); }
