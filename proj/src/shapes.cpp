#include "routegraph/shapes.hpp"

#include <algorithm>

namespace routegraph::distill {

bool ResponseShape::operator==(const ResponseShape& other) const {
    if (kind != other.kind || optional != other.optional) return false;
    if (kind == Kind::object) {
        return fields == other.fields;
    }
    if (kind == Kind::array) {
        if (!element || !other.element) return element == other.element;
        return *element == *other.element;
    }
    return true;
}

ResponseShape ResponseShape::scalar(Kind k, bool opt) {
    ResponseShape s;
    s.kind = k;
    s.optional = opt;
    return s;
}

ResponseShape ResponseShape::object(std::map<std::string, ResponseShape> fields) {
    ResponseShape s;
    s.kind = Kind::object;
    s.fields = std::move(fields);
    return s;
}

ResponseShape ResponseShape::array(ResponseShape element) {
    ResponseShape s;
    s.kind = Kind::array;
    s.element = std::make_shared<ResponseShape>(std::move(element));
    return s;
}

const char* kind_name(ResponseShape::Kind kind) {
    switch (kind) {
    case ResponseShape::Kind::object: return "object";
    case ResponseShape::Kind::array: return "array";
    case ResponseShape::Kind::string: return "string";
    case ResponseShape::Kind::number: return "number";
    case ResponseShape::Kind::boolean: return "boolean";
    case ResponseShape::Kind::null_kind: return "null";
    }
    return "null";
}

ResponseShape::Kind kind_from_name(const std::string& name) {
    if (name == "object") return ResponseShape::Kind::object;
    if (name == "array") return ResponseShape::Kind::array;
    if (name == "string") return ResponseShape::Kind::string;
    if (name == "number") return ResponseShape::Kind::number;
    if (name == "boolean") return ResponseShape::Kind::boolean;
    return ResponseShape::Kind::null_kind;
}

ResponseShape infer_shape(const nlohmann::json& value) {
    using Kind = ResponseShape::Kind;
    if (value.is_object()) {
        ResponseShape s = ResponseShape::object();
        for (auto it = value.begin(); it != value.end(); ++it) {
            s.fields.emplace(it.key(), infer_shape(it.value()));
        }
        return s;
    }
    if (value.is_array()) {
        ResponseShape element = ResponseShape::scalar(Kind::null_kind);
        bool first = true;
        for (const auto& item : value) {
            ResponseShape item_shape = infer_shape(item);
            element = first ? item_shape : unify(element, item_shape);
            first = false;
        }
        return ResponseShape::array(std::move(element));
    }
    if (value.is_string()) return ResponseShape::scalar(Kind::string);
    if (value.is_number()) return ResponseShape::scalar(Kind::number);
    if (value.is_boolean()) return ResponseShape::scalar(Kind::boolean);
    return ResponseShape::scalar(Kind::null_kind);
}

ResponseShape infer_shape_from_text(const std::string& body) {
    auto parsed = nlohmann::json::parse(body, nullptr, false);
    if (parsed.is_discarded()) {
        throw NotStructured("body is not JSON");
    }
    return infer_shape(parsed);
}

ResponseShape unify(const ResponseShape& a, const ResponseShape& b) {
    using Kind = ResponseShape::Kind;
    if (a.kind == Kind::null_kind && b.kind != Kind::null_kind) {
        ResponseShape out = b;
        out.optional = true;
        return out;
    }
    if (b.kind == Kind::null_kind && a.kind != Kind::null_kind) {
        ResponseShape out = a;
        out.optional = true;
        return out;
    }
    if (a.kind != b.kind) {
        ResponseShape out = a;
        out.optional = true;
        return out;
    }

    ResponseShape out;
    out.kind = a.kind;
    out.optional = a.optional || b.optional;
    if (a.kind == Kind::object) {
        for (const auto& [name, shape] : a.fields) {
            auto it = b.fields.find(name);
            if (it == b.fields.end()) {
                ResponseShape f = shape;
                f.optional = true;
                out.fields.emplace(name, std::move(f));
            } else {
                out.fields.emplace(name, unify(shape, it->second));
            }
        }
        for (const auto& [name, shape] : b.fields) {
            if (!a.fields.count(name)) {
                ResponseShape f = shape;
                f.optional = true;
                out.fields.emplace(name, std::move(f));
            }
        }
    } else if (a.kind == Kind::array) {
        out.element = std::make_shared<ResponseShape>(unify(*a.element, *b.element));
    }
    return out;
}

nlohmann::json render_example(const ResponseShape& shape) {
    using Kind = ResponseShape::Kind;
    switch (shape.kind) {
    case Kind::object: {
        nlohmann::json obj = nlohmann::json::object();
        for (const auto& [name, field] : shape.fields) {
            obj[name] = render_example(field);
        }
        return obj;
    }
    case Kind::array: {
        nlohmann::json arr = nlohmann::json::array();
        if (shape.element && shape.element->kind != Kind::null_kind) {
            arr.push_back(render_example(*shape.element));
            arr.push_back(render_example(*shape.element));
        }
        return arr;
    }
    case Kind::string: return "s";
    case Kind::number: return 1.5;
    case Kind::boolean: return true;
    case Kind::null_kind: return nullptr;
    }
    return nullptr;
}

namespace {

void flatten_into(const ResponseShape& shape, const std::string& prefix,
                  std::vector<std::string>& out) {
    using Kind = ResponseShape::Kind;
    std::string line = prefix + ":" + kind_name(shape.kind);
    if (shape.optional) line += "?";
    out.push_back(line);
    if (shape.kind == Kind::object) {
        for (const auto& [name, field] : shape.fields) {
            flatten_into(field, prefix + "." + name, out);
        }
    } else if (shape.kind == Kind::array && shape.element) {
        flatten_into(*shape.element, prefix + "[]", out);
    }
}

} // namespace

std::vector<std::string> flatten_shape(const ResponseShape& shape) {
    std::vector<std::string> out;
    flatten_into(shape, "", out);
    std::sort(out.begin(), out.end());
    return out;
}

std::string shape_to_string(const ResponseShape& shape) {
    using Kind = ResponseShape::Kind;
    switch (shape.kind) {
    case Kind::object: {
        std::string out = "{";
        bool first = true;
        for (const auto& [name, field] : shape.fields) {
            if (!first) out += ", ";
            first = false;
            out += name;
            if (field.optional) out += "?";
            out += ": " + shape_to_string(field);
        }
        return out + "}";
    }
    case Kind::array:
        return "[" + (shape.element ? shape_to_string(*shape.element) : std::string("null")) + "]";
    default:
        return kind_name(shape.kind);
    }
}

nlohmann::json shape_to_json(const ResponseShape& shape) {
    nlohmann::json j{{"kind", kind_name(shape.kind)}};
    if (shape.optional) j["optional"] = true;
    if (shape.kind == ResponseShape::Kind::object) {
        nlohmann::json fields = nlohmann::json::object();
        for (const auto& [name, field] : shape.fields) {
            fields[name] = shape_to_json(field);
        }
        j["fields"] = std::move(fields);
    } else if (shape.kind == ResponseShape::Kind::array) {
        j["element"] = shape.element ? shape_to_json(*shape.element)
                                     : shape_to_json(ResponseShape::scalar(ResponseShape::Kind::null_kind));
    }
    return j;
}

ResponseShape shape_from_json(const nlohmann::json& j) {
    ResponseShape s;
    s.kind = kind_from_name(j.value("kind", "null"));
    s.optional = j.value("optional", false);
    if (s.kind == ResponseShape::Kind::object && j.contains("fields")) {
        for (auto it = j["fields"].begin(); it != j["fields"].end(); ++it) {
            s.fields.emplace(it.key(), shape_from_json(it.value()));
        }
    } else if (s.kind == ResponseShape::Kind::array) {
        s.element = std::make_shared<ResponseShape>(
            j.contains("element") ? shape_from_json(j["element"])
                                  : ResponseShape::scalar(ResponseShape::Kind::null_kind));
    }
    return s;
}

} // namespace routegraph::distill
