#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace hilayout {

/// Base exception. Every error carries a module-tagged code such as
/// "hierarchy_io.ParseError" so CLI exit codes and HTTP statuses can be
/// derived from it without string matching on messages.
class Error : public std::runtime_error {
public:
    Error(std::string module, std::string kind, const std::string& message)
        : std::runtime_error(message), module_(std::move(module)), kind_(std::move(kind)) {}

    const std::string& module() const noexcept { return module_; }
    const std::string& kind() const noexcept { return kind_; }
    std::string code() const { return module_ + "." + kind_; }

private:
    std::string module_;
    std::string kind_;
};

#define HILAYOUT_DEFINE_ERROR(Name, Module)                                      \
    class Name : public Error {                                                  \
    public:                                                                      \
        explicit Name(const std::string& message) : Error(Module, #Name, message) {} \
    }

// scene_model
HILAYOUT_DEFINE_ERROR(MissingPose, "scene_model");
HILAYOUT_DEFINE_ERROR(StructureError, "scene_model");

// hierarchy_io
HILAYOUT_DEFINE_ERROR(ParseError, "hierarchy_io");
HILAYOUT_DEFINE_ERROR(SchemaError, "hierarchy_io");
HILAYOUT_DEFINE_ERROR(Unrepairable, "hierarchy_io");

// llm_client
HILAYOUT_DEFINE_ERROR(ProviderError, "llm_client");
HILAYOUT_DEFINE_ERROR(ExhaustedRetries, "llm_client");
HILAYOUT_DEFINE_ERROR(FixtureMissing, "llm_client");

// text_embed, corpus, catalog
HILAYOUT_DEFINE_ERROR(FormatError, "io");
HILAYOUT_DEFINE_ERROR(IoError, "io");
HILAYOUT_DEFINE_ERROR(EmptyCatalog, "catalog");

// placement_net
HILAYOUT_DEFINE_ERROR(MissingGroundTruth, "placement_net");
HILAYOUT_DEFINE_ERROR(NonFiniteLoss, "placement_net");
HILAYOUT_DEFINE_ERROR(UnknownRelation, "relations");

// layout_solver
HILAYOUT_DEFINE_ERROR(Infeasible, "layout_solver");

// metrics
HILAYOUT_DEFINE_ERROR(InsufficientSamples, "metrics");

#undef HILAYOUT_DEFINE_ERROR

}  // namespace hilayout
