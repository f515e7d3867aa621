#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "mtr/corpus.hpp"
#include "mtr/embedding.hpp"
#include "mtr/errors.hpp"
#include "mtr/rewriter.hpp"
#include "test_support.hpp"

using namespace mtr;
using nlohmann::json;
using mtrtest::contains;
using mtrtest::error_message;
using mtrtest::make_corpus;

namespace {

/// In-process HTTP server for exercising the remote wire formats.
class TestServer {
public:
    TestServer() {
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~TestServer() {
        server_.stop();
        thread_.join();
    }
    httplib::Server& handle() { return server_; }
    HttpEndpoint endpoint(const std::string& path) const {
        HttpEndpoint e;
        e.url = "http://127.0.0.1:" + std::to_string(port_) + path;
        e.backoff_base_ms = 1;
        return e;
    }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
};

} // namespace

TEST_CASE("remote embedding provider speaks the documented wire format") {
    TestServer server;
    json last_request;
    server.handle().Post("/v1/embeddings",
                         [&](const httplib::Request& req, httplib::Response& res) {
                             last_request = json::parse(req.body);
                             json data = json::array();
                             size_t i = 0;
                             for (const auto& text : last_request["input"]) {
                                 double x = 1.0 + static_cast<double>(text.get<std::string>().size());
                                 data.push_back({{"index", i++}, {"embedding", {x, 0.0, 3.0}}});
                             }
                             res.set_content(json{{"data", data}}.dump(), "application/json");
                         });

    RemoteEmbeddingProvider provider(server.endpoint("/v1/embeddings"), "embed-model");
    EmbeddingVector v = provider.embed("hello");
    CHECK(last_request["model"] == "embed-model");
    CHECK(last_request["input"] == json::array({"hello"}));
    REQUIRE(v.values.size() == 3);
    CHECK(v.norm == 1.0);
    // (6, 0, 3) normalized
    CHECK(v.values[0] == doctest::Approx(6.0 / std::sqrt(45.0)).epsilon(1e-12));
    CHECK(provider.dimension() == 3);
}

TEST_CASE("remote embedding batches tool descriptions and restores index order") {
    TestServer server;
    server.handle().Post("/embed", [&](const httplib::Request& req, httplib::Response& res) {
        json body = json::parse(req.body);
        json data = json::array();
        // respond in reverse order; the client must reassemble by index
        for (size_t i = body["input"].size(); i-- > 0;) {
            data.push_back({{"index", i}, {"embedding", {static_cast<double>(i + 1), 1.0}}});
        }
        res.set_content(json{{"data", data}}.dump(), "application/json");
    });

    ToolCorpus corpus = make_corpus({{"a", "first"}, {"b", "second"}, {"c", "third"}});
    RemoteEmbeddingProvider provider(server.endpoint("/embed"), "m", 2);
    auto vectors = provider.embed_tools(corpus.tools());
    REQUIRE(vectors.size() == 3);
    // batch 1 = {a, b} -> (1,1), (2,1); batch 2 = {c} -> (1,1)
    CHECK(vectors[0].values[0] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
    CHECK(vectors[1].values[0] == doctest::Approx(2.0 / std::sqrt(5.0)).epsilon(1e-12));
    CHECK(vectors[2].values[0] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("post_json retries 5xx with backoff and gives up after max attempts") {
    TestServer server;
    std::atomic<int> calls{0};
    server.handle().Post("/flaky", [&](const httplib::Request&, httplib::Response& res) {
        if (++calls < 3) {
            res.status = 500;
            res.set_content("try again", "text/plain");
        } else {
            res.set_content("{\"ok\":true}", "application/json");
        }
    });
    json out = post_json(server.endpoint("/flaky"), json{{"x", 1}});
    CHECK(out["ok"] == true);
    CHECK(calls == 3);

    SUBCASE("exhausted retries raise RemoteError") {
        calls = 100; // handler now always 200; use a fresh always-500 route
        server.handle().Post("/down", [&](const httplib::Request&, httplib::Response& res) {
            res.status = 503;
        });
        CHECK_THROWS_AS(post_json(server.endpoint("/down"), json::object()), RemoteError);
    }
}

TEST_CASE("post_json fails fast on 4xx") {
    TestServer server;
    std::atomic<int> calls{0};
    server.handle().Post("/reject", [&](const httplib::Request&, httplib::Response& res) {
        ++calls;
        res.status = 401;
        res.set_content("bad key", "text/plain");
    });
    std::string msg =
        error_message([&] { post_json(server.endpoint("/reject"), json::object()); });
    CHECK(contains(msg, "401"));
    CHECK(calls == 1);
}

TEST_CASE("MTR_API_KEY is sent as a bearer token") {
    TestServer server;
    std::string seen_auth = "unset";
    server.handle().Post("/auth", [&](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.get_header_value("Authorization");
        res.set_content("{}", "application/json");
    });
    ::setenv("MTR_API_KEY", "sekrit", 1);
    post_json(server.endpoint("/auth"), json::object());
    ::unsetenv("MTR_API_KEY");
    CHECK(seen_auth == "Bearer sekrit");
}

TEST_CASE("remote embedding dimension mismatch is an error") {
    TestServer server;
    std::atomic<int> calls{0};
    server.handle().Post("/dims", [&](const httplib::Request&, httplib::Response& res) {
        json embedding = (++calls == 1) ? json{1.0, 2.0} : json{1.0, 2.0, 3.0};
        json data = json::array({{{"index", 0}, {"embedding", embedding}}});
        res.set_content(json{{"data", data}}.dump(), "application/json");
    });
    RemoteEmbeddingProvider provider(server.endpoint("/dims"), "m");
    provider.embed("first");
    std::string msg = error_message([&] { provider.embed("second"); });
    CHECK(contains(msg, "dimension mismatch"));
}

TEST_CASE("remote rewriter sends the template messages and parses completions") {
    TestServer server;
    json last_request;
    std::string reply = "  Search for the movie\nand compare ratings  ";
    server.handle().Post("/chat", [&](const httplib::Request& req, httplib::Response& res) {
        last_request = json::parse(req.body);
        json doc{{"choices", json::array({{{"message", {{"content", reply}}}}})}};
        res.set_content(doc.dump(), "application/json");
    });

    ToolCorpus corpus = make_corpus({{"a", "alpha desc"}, {"b", "beta desc"}});
    ToolSubset subset;
    subset.tools = {&corpus.at(0), &corpus.at(1)};
    RewriteConfig cfg;
    cfg.temperature = 0.7;
    RemoteRewriter rewriter(server.endpoint("/chat"), "chat-model");

    RewrittenQuery out = rewrite_once(rewriter, "compare avatar ratings", subset, cfg);
    CHECK(out.text == "Search for the movie and compare ratings");
    CHECK(out.source == RewriteSource::Remote);

    CHECK(last_request["model"] == "chat-model");
    CHECK(last_request["temperature"] == 0.7);
    REQUIRE(last_request["messages"].size() == 2);
    CHECK(last_request["messages"][0]["role"] == "system");
    CHECK(contains(last_request["messages"][0]["content"].get<std::string>(),
                   "Reply with the rewritten query only."));
    CHECK(last_request["messages"][1]["role"] == "user");
    std::string user = last_request["messages"][1]["content"].get<std::string>();
    CHECK(contains(user, "Tools:\na: alpha desc\nb: beta desc\n"));
    CHECK(contains(user, "Query: compare avatar ratings\nRewritten query:"));

    SUBCASE("empty completion is a remote error") {
        reply = "   \n  ";
        CHECK_THROWS_AS(rewrite_once(rewriter, "anything", subset, cfg), RemoteError);
    }
}

TEST_CASE("file embedding provider serves tools by id and queries by text") {
    mtrtest::TempDir dir;
    std::string path = dir.file("embeddings.jsonl");
    write_file(path,
               "{\"id\":\"a\",\"vector\":[1.0,0.0]}\n"
               "{\"id\":\"b\",\"vector\":[0.0,2.0]}\n"
               "{\"id\":\"what is a\",\"vector\":[1.0,1.0]}\n");

    ToolCorpus corpus = make_corpus({{"a", "tool a"}, {"b", "tool b"}});
    auto provider = std::make_shared<FileEmbeddingProvider>(path);
    CHECK(provider->dimension() == 2);

    DenseIndex index(corpus, provider);
    Ranking r = index.rank_full("what is a");
    CHECK(r.entries()[0].id == "a"); // query (1,1) is closer to (1,0) than... equal; id tie-break
    CHECK(r.rank_of("a") == 1);

    SUBCASE("missing key is an error naming the text") {
        std::string msg = error_message([&] { provider->embed("unknown query"); });
        CHECK(contains(msg, "not precomputed"));
        CHECK(contains(msg, "unknown query"));
    }
    SUBCASE("corpus id missing from the file fails the index build") {
        ToolCorpus bigger = make_corpus({{"a", "x"}, {"missing", "y"}});
        CHECK_THROWS_AS(DenseIndex(bigger, provider), Error);
    }
}
