#include "tailbound/commands.hpp"

int main(int argc, char** argv) { return tailbound::cli::run(argc, argv); }
