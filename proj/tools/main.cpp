#include "pafrob/cli/commands.hpp"

int main(int argc, char** argv) { return pafrob::cli::run(argc, argv); }
