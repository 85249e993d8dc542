#pragma once

#include "wordgaze/workspace.hpp"

#include <memory>
#include <string>

namespace wordgaze {

/// Read-only HTTP query service over a loaded workspace.
class QueryServer {
public:
    explicit QueryServer(std::shared_ptr<const WorkspaceView> view);
    ~QueryServer();
    QueryServer(const QueryServer&) = delete;
    QueryServer& operator=(const QueryServer&) = delete;

    /// Binds; port 0 picks a free port. Returns the bound port, throws Error on failure.
    int bind(const std::string& host, int port);
    /// Blocks until stop().
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace wordgaze
