// Serves the scripted chat backend and the stub scorer until stdin closes or
// SIGINT arrives. Prints the two URLs on startup.
#include <csignal>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "probe_stub/stubs.hpp"

namespace {
volatile std::sig_atomic_t g_stop = 0;
}

int main(int argc, char** argv) {
  CLI::App app{"Scripted chat and scorer stubs for local runs"};
  std::size_t dim = 64;
  bool wait_stdin = false;
  app.add_option("--dim", dim, "Embedding dimension");
  app.add_flag("--stdin", wait_stdin, "Exit when stdin reaches EOF instead of waiting for SIGINT");
  CLI11_PARSE(app, argc, argv);

  probe::stub::ChatStub chat;
  probe::stub::ScorerStub scorer(dim);
  std::cout << "chat_endpoint " << chat.endpoint() << "\n"
            << "scorer_url " << scorer.base_url() << std::endl;

  std::signal(SIGINT, [](int) { g_stop = 1; });
  std::signal(SIGTERM, [](int) { g_stop = 1; });
  if (wait_stdin) {
    for (std::string line; std::getline(std::cin, line);) {
    }
  } else {
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  std::cout << "chat_requests " << chat.requests() << "\nscorer_requests " << scorer.requests() << std::endl;
  return 0;
}
