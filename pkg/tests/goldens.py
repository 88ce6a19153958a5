"""Worked join examples with their expected result grains.

Each case lists the two inputs, the join key (``None`` for a natural join),
the expected grain as a sorted multiset of field names (provenance is
ignored) and the expected case tag.  ``exact`` optionally pins the grain
including provenance.
"""

from dataclasses import dataclass, field

from conftest import iso, rel, sig
from grainck.grain import IsoWitness, RelationDecl
from grainck.inference import CASE_A, CASE_B, JoinKeySpec, infer_equijoin, infer_natural_join
from grainck.typealg import TypeSig


@dataclass
class Golden:
    id: str
    left: RelationDecl
    right: RelationDecl
    key: JoinKeySpec | None
    grain: tuple[str, ...]
    case: str
    exact: TypeSig | None = None
    isos: dict[str, IsoWitness] = field(default_factory=dict)

    def infer(self):
        if self.key is None:
            return infer_natural_join(self.left, self.right, isos=self.isos)
        return infer_equijoin(self.left, self.right, self.key, isos=self.isos)


def names(grain: TypeSig) -> tuple[str, ...]:
    return tuple(sorted(f.name for f in grain))


def _names(*fields):
    return tuple(sorted(fields))


def _iso_key(w: IsoWitness) -> JoinKeySpec:
    return JoinKeySpec(w.left, w.right, w.name)


_cust_guid = iso("cust_guid", "CustomerId", "ClientGuid")
_date_ts = iso("date_ts", "OrderDate", "OrderTimestamp")
_ymd = iso("ymd_date", "Year Month Day", "Date")
_dept = iso("dept", "DeptId", "DepartmentId")

GOLDENS = [
    # general join rule
    Golden("main-1", rel("R1", "Account Customer", "Account"),
           rel("R2", "Customer Address", "Customer Address"),
           JoinKeySpec.same("Customer"), _names("Account", "Address"), CASE_A),
    Golden("main-2", rel("R1", "A B C E", "A C"), rel("R2", "A B C D", "A B"),
           JoinKeySpec.same("A", "B", "C"), _names("A", "B", "C"), CASE_B),
    Golden("main-3", rel("R1", "A B C", "A B"), rel("R2", "B C D", "C D"),
           JoinKeySpec.same("B"), _names("A", "C", "D"), CASE_A, exact=sig("A", "rhs.C", "D")),
    # equal grains
    Golden("equal-1", rel("Customer", "CustomerId Name", "CustomerId"),
           rel("LoyalCustomer", "CustomerId Tier", "CustomerId"),
           JoinKeySpec.same("CustomerId"), _names("CustomerId"), CASE_A),
    Golden("equal-2", rel("Customer", "CustomerId RegionId Name", "CustomerId RegionId"),
           rel("CustomerSegment", "CustomerId SegmentId Score", "CustomerId SegmentId"),
           JoinKeySpec.same("CustomerId"), _names("RegionId", "SegmentId", "CustomerId"), CASE_A),
    Golden("equal-3", rel("Customer", "CustomerId RegionId ProductId", "CustomerId RegionId"),
           rel("Order", "CustomerId OrderDate ProductId", "CustomerId OrderDate"),
           JoinKeySpec.same("CustomerId", "ProductId"), _names("RegionId", "OrderDate", "CustomerId"), CASE_A),
    Golden("equal-4", rel("Customer", "CustomerId Email", "CustomerId"),
           rel("LoyaltyCustomer", "CustomerId Email", "CustomerId"),
           JoinKeySpec.same("Email"), _names("CustomerId", "CustomerId"), CASE_A,
           exact=sig("lhs.CustomerId", "rhs.CustomerId")),
    # ordered grains
    Golden("ordered-1", rel("OrderDetail", "OrderId LineItemId Qty", "OrderId LineItemId"),
           rel("Order", "OrderId OrderDate", "OrderId"),
           JoinKeySpec.same("OrderId"), _names("OrderId", "LineItemId"), CASE_A),
    Golden("ordered-2",
           rel("OrderLineItem", "OrderId LineItemId ProductId", "OrderId LineItemId ProductId"),
           rel("OrderDetail", "OrderId LineItemId Qty", "OrderId LineItemId"),
           JoinKeySpec.same("OrderId"), _names("LineItemId", "ProductId", "LineItemId", "OrderId"), CASE_A,
           exact=sig("lhs.LineItemId", "ProductId", "rhs.LineItemId", "OrderId")),
    Golden("ordered-3", rel("OrderDetail", "OrderId LineItemId CustomerId", "OrderId LineItemId"),
           rel("Order", "OrderId OrderDate CustomerId", "OrderId OrderDate"),
           JoinKeySpec.same("OrderId", "CustomerId"), _names("LineItemId", "OrderDate", "OrderId"), CASE_A),
    Golden("ordered-4", rel("OrderDetail", "OrderId LineItemId CustomerId", "OrderId LineItemId"),
           rel("Order", "OrderId CustomerId", "OrderId"),
           JoinKeySpec.same("CustomerId"), _names("OrderId", "LineItemId", "OrderId"), CASE_A,
           exact=sig("lhs.OrderId", "LineItemId", "rhs.OrderId")),
    # incomparable grains
    Golden("incomparable-A",
           rel("SalesChannel", "CustomerId ChannelId Date Amount", "CustomerId ChannelId Date"),
           rel("SalesProduct", "CustomerId ProductId Date Amount", "CustomerId ProductId Date"),
           JoinKeySpec.same("CustomerId", "Date"), _names("ChannelId", "ProductId", "CustomerId", "Date"), CASE_A),
    Golden("incomparable-B",
           rel("Sales", "SalesId ProductId StoreId SupplierId Amount", "SalesId ProductId StoreId"),
           rel("Product", "ProductId SupplierId CategoryId StoreId", "ProductId SupplierId CategoryId"),
           JoinKeySpec.same("ProductId", "StoreId", "SupplierId"),
           _names("SalesId", "CategoryId", "ProductId", "StoreId", "SupplierId"), CASE_B),
    # natural joins
    Golden("natural-A", rel("Customer", "CustomerId CustomerName RegionId", "CustomerId RegionId"),
           rel("CustomerSegment", "CustomerId RegionId SegmentId", "CustomerId RegionId"),
           None, _names("CustomerId", "RegionId"), CASE_A),
    Golden("natural-B", rel("R1", "A B C", "A B"), rel("R2", "B C D", "C D"),
           None, _names("A", "D", "B", "C"), CASE_B),
    # isomorphic keys
    Golden("iso-1", rel("SystemA", "CustomerId Name Email", "CustomerId"),
           rel("SystemB", "ClientGuid Address Phone", "ClientGuid"),
           _iso_key(_cust_guid), _names("CustomerId"), CASE_A, isos={"cust_guid": _cust_guid}),
    Golden("iso-2", rel("Historical", "OrderDate Amount", "OrderDate"),
           rel("Current", "OrderTimestamp Amount Status", "OrderTimestamp"),
           _iso_key(_date_ts), _names("OrderDate"), CASE_A, isos={"date_ts": _date_ts}),
    Golden("iso-3", rel("DailySales", "Year Month Day Sales", "Year Month Day"),
           rel("Stock", "Date Inventory", "Date"),
           _iso_key(_ymd), _names("Year", "Month", "Day"), CASE_A, isos={"ymd_date": _ymd}),
    Golden("iso-4", rel("Employee", "EmployeeId Name DeptId", "EmployeeId"),
           rel("Department", "DepartmentId DeptName Budget", "DepartmentId"),
           _iso_key(_dept), _names("EmployeeId"), CASE_A, isos={"dept": _dept}),
]
