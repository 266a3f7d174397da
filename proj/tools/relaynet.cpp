#include "relaynet/cli.hpp"

int main(int argc, char** argv) { return relaynet::cli::run(argc, argv); }
