#include "stlf/cli/app.hpp"
#include "stlf/core/runtime.hpp"

int main(int argc, char** argv) {
	stlf::tune_allocator();
	return stlf::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
