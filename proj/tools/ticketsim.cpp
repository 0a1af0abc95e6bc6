#include "ticketsim/cli.hpp"

int main(int argc, char** argv) { return ticketsim::cli::run(argc, argv); }
