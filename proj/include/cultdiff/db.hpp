// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>

struct sqlite3;
struct sqlite3_stmt;

namespace cultdiff {

class Statement {
public:
    Statement(sqlite3* db, std::string_view sql);
    ~Statement();
    Statement(Statement&& other) noexcept;
    Statement& operator=(Statement&&) = delete;
    Statement(const Statement&) = delete;

    Statement& bind(int index, std::int64_t value);
    Statement& bind(int index, int value) { return bind(index, static_cast<std::int64_t>(value)); }
    Statement& bind(int index, double value);
    Statement& bind(int index, std::string_view value);
    Statement& bind(int index, const std::string& value) { return bind(index, std::string_view(value)); }
    Statement& bind(int index, const char* value) { return bind(index, std::string_view(value)); }
    Statement& bind_null(int index);
    template <class T>
    Statement& bind(int index, const std::optional<T>& value) {
        return value ? bind(index, *value) : bind_null(index);
    }

    /// Returns true while a row is available.
    bool step();
    void run() { while (step()) {} }
    void reset();

    bool is_null(int column) const;
    std::int64_t column_int(int column) const;
    double column_double(int column) const;
    std::string column_text(int column) const;
    std::optional<std::int64_t> column_opt_int(int column) const;
    std::optional<std::string> column_opt_text(int column) const;

private:
    sqlite3* m_db;
    sqlite3_stmt* m_stmt = nullptr;
};

/// One SQLite connection. Mutations serialize through writer(); the connection itself
/// is opened in serialized threading mode so readers may share it.
class Database {
public:
    static std::shared_ptr<Database> open(const std::filesystem::path& path);
    static std::shared_ptr<Database> in_memory() { return open(":memory:"); }

    ~Database();
    Database(const Database&) = delete;
    Database& operator=(const Database&) = delete;

    void exec(std::string_view sql);
    Statement prepare(std::string_view sql) { return Statement(m_db, sql); }
    std::int64_t last_insert_id() const;

    std::recursive_mutex& writer() { return m_writer; }

    /// Runs fn inside one transaction under the writer lock; rolls back on exception.
    template <class F>
    decltype(auto) transaction(F&& fn) {
        std::lock_guard lock(m_writer);
        const bool outer = m_depth++ == 0;
        if (outer) exec("BEGIN IMMEDIATE");
        try {
            if constexpr (std::is_void_v<decltype(fn())>) {
                fn();
                if (outer) exec("COMMIT");
                --m_depth;
            } else {
                decltype(auto) result = fn();
                if (outer) exec("COMMIT");
                --m_depth;
                return result;
            }
        } catch (...) {
            --m_depth;
            if (outer) exec("ROLLBACK");
            throw;
        }
    }

private:
    explicit Database(sqlite3* db) : m_db(db) {}

    sqlite3* m_db;
    std::recursive_mutex m_writer;
    int m_depth = 0;
};

}  // namespace cultdiff
