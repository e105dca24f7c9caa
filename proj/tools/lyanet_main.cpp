#include "lyanet/cli/commands.hpp"

int main(int argc, char** argv) { return lyanet::cli::run(argc, argv); }
