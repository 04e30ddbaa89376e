#include "agentcrowd/cli.hpp"

int main(int argc, char** argv) { return agentcrowd::run_cli(argc, argv); }
