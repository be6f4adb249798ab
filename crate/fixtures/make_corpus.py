#!/usr/bin/env python3
"""Builds the fixture corpus under fixtures/corpus.

Each service is built as a throwaway git repository with fixed identities and
dates, then exported one `git format-patch` file per commit. Hunk labels are
written by hand next to each commit and checked against the hunk headers git
actually produced, so the script fails if a label list goes stale.

Run from anywhere: python3 fixtures/make_corpus.py
"""

import json
import os
import re
import shutil
import subprocess
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent / "corpus"

WIN = "win-path-separators"
SD = "system-drawing-common"
JG = "jaeger-deployment"
DF = "dockerfile-additions"
LG = "logging-deps"
K8 = "k8s-sidecar-manifests"

EDIT_KB = JG
EDIT_KEYWORD = "jaeger-agent"


def lines(*rows):
    return "\n".join(rows) + "\n"


def filler(prefix, n):
    return [f"{prefix} step {i}" for i in range(1, n + 1)]


# ---------------------------------------------------------------- billing-api

BILLING_CSPROJ = lines(
    '<Project Sdk="Microsoft.NET.Sdk.Web">',
    "  <PropertyGroup>",
    "    <TargetFramework>net6.0</TargetFramework>",
    "    <RuntimeIdentifier>win-x64</RuntimeIdentifier>",
    "  </PropertyGroup>",
    "  <ItemGroup>",
    '    <PackageReference Include="log4net" Version="2.0.15" />',
    '    <PackageReference Include="System.Drawing.Common" Version="6.0.0" />',
    '    <PackageReference Include="Newtonsoft.Json" Version="13.0.1" />',
    "  </ItemGroup>",
    "</Project>",
)

BILLING_PROGRAM = lines(
    "using System;",
    "using System.Diagnostics;",
    "using log4net;",
    "using log4net.Config;",
    "",
    "namespace Billing.Api",
    "{",
    "    public static class Program",
    "    {",
    "        private static readonly ILog Log = LogManager.GetLogger(typeof(Program));",
    "",
    "        public static int Main(string[] args)",
    "        {",
    '            XmlConfigurator.Configure(new System.IO.FileInfo("log4net.config"));',
    '            var verbose = Array.IndexOf(args, "--verbose") >= 0;',
    "            var host = BillingHost.Create(verbose);",
    "            host.Start();",
    '            Log.Info("billing api started");',
    "            host.WaitForShutdown();",
    "            return 0;",
    "        }",
    "",
    "        public static void ReportCrash(Exception ex)",
    "        {",
    '            Log.Error("unhandled exception", ex);',
    '            EventLog.WriteEntry("BillingApi", ex.ToString(), EventLogEntryType.Error);',
    "        }",
    "    }",
    "}",
)

BILLING_RENDERER = lines(
    "using System.Drawing;",
    "using System.Drawing.Imaging;",
    "namespace Billing.Api",
    "{",
    "    public sealed class InvoiceRenderer",
    "    {",
    "        public byte[] RenderStamp(string text)",
    "        {",
    "            using var bmp = new Bitmap(320, 80);",
    "            using var g = Graphics.FromImage(bmp);",
    '            g.DrawString(text, new Font("Arial", 14), Brushes.Black, 4, 4);',
    "            using var ms = new System.IO.MemoryStream();",
    "            bmp.Save(ms, ImageFormat.Png);",
    "            return ms.ToArray();",
    "        }",
    "    }",
    "}",
)

BILLING_BUILD = lines(
    "param([string]$Configuration = 'Release')",
    '$out = "C:\\build\\billing"',
    *filler("# build", 10),
    "dotnet build -c $Configuration",
    *filler("# package", 10),
    "Copy-Item src\\Billing.Api\\bin\\* $out -Recurse",
)

BILLING_DEPLOY = lines(
    "@echo off",
    "rem deploy the billing api",
    "set TARGET=D:\\services\\billing",
    "if not exist %TARGET% mkdir %TARGET%",
    "xcopy /s /y publish %TARGET%",
    "echo stopping service",
    "sc stop BillingApi",
    "echo starting service",
    "sc start BillingApi",
    "echo done",
)

BILLING_DEPLOY_SH = lines(
    "@echo off",
    "rem deploy the billing api",
    "set TARGET=/srv/billing",
    "if not exist %TARGET% mkdir %TARGET%",
    "xcopy /s /y publish %TARGET%",
    "echo stopping service",
    "sc stop BillingApi",
    "echo starting service",
    "sc start BillingApi",
    "echo done",
)

BILLING_README = lines(
    "# Billing API",
    "",
    "Builds land in C:\\billing\\out by default.",
    "Run scripts/build.ps1 to produce a release build.",
)

BILLING = {
    "id": "billing-api",
    "initial": {
        "src/Billing.Api/Billing.Api.csproj": BILLING_CSPROJ,
        "src/Billing.Api/Program.cs": BILLING_PROGRAM,
        "src/Billing.Api/InvoiceRenderer.cs": BILLING_RENDERER,
        "src/Billing.Api/log4net.config": lines(
            "<log4net>",
            '  <appender name="file" type="log4net.Appender.RollingFileAppender">',
            '    <file value="logs/billing.log" />',
            "  </appender>",
            "  <root>",
            '    <level value="INFO" />',
            '    <appender-ref ref="file" />',
            "  </root>",
            "</log4net>",
        ),
        "src/Billing.Api/appsettings.json": lines(
            "{",
            '  "RequestTimeoutSeconds": 30,',
            '  "Currency": "EUR"',
            "}",
        ),
        "scripts/build.ps1": BILLING_BUILD,
        "scripts/deploy.cmd": BILLING_DEPLOY,
        "README.md": BILLING_README,
        "assets/logo.png": b"\x89PNG\r\n\x1a\n\x00\x00\x00\rIHDR\x00\x01\x00\x01",
        "Dockerfile.windows": lines(
            "FROM mcr.microsoft.com/dotnet/framework/aspnet:4.8-windowsservercore-ltsc2019",
            "WORKDIR /inetpub/wwwroot",
            "COPY publish/ .",
        ),
    },
    "commits": [
        {
            "msg": "Bump Newtonsoft.Json to 13.0.2",
            "ops": [("sub", "src/Billing.Api/Billing.Api.csproj", 'Version="13.0.1"', 'Version="13.0.2"')],
            "labels": {"src/Billing.Api/Billing.Api.csproj": [[]]},
        },
        {
            "msg": "Replace log4net with Serilog console logging",
            "ops": [
                (
                    "sub",
                    "src/Billing.Api/Billing.Api.csproj",
                    '    <PackageReference Include="log4net" Version="2.0.15" />\n',
                    '    <PackageReference Include="Serilog.AspNetCore" Version="6.1.0" />\n'
                    '    <PackageReference Include="Serilog.Sinks.Console" Version="4.1.0" />\n',
                ),
                ("sub", "src/Billing.Api/Program.cs", "using log4net;\nusing log4net.Config;\n", "using Serilog;\n"),
                (
                    "sub",
                    "src/Billing.Api/Program.cs",
                    "        private static readonly ILog Log = LogManager.GetLogger(typeof(Program));\n",
                    "",
                ),
                (
                    "sub",
                    "src/Billing.Api/Program.cs",
                    '            XmlConfigurator.Configure(new System.IO.FileInfo("log4net.config"));\n',
                    "            Log.Logger = new LoggerConfiguration().WriteTo.Console().CreateLogger();\n",
                ),
                ("sub", "src/Billing.Api/Program.cs", 'Log.Info("billing api started")', 'Log.Information("billing api started")'),
                ("sub", "src/Billing.Api/Program.cs", 'Log.Error("unhandled exception", ex)', 'Log.Error(ex, "unhandled exception")'),
                ("rm", "src/Billing.Api/log4net.config"),
            ],
            "labels": {
                "src/Billing.Api/Billing.Api.csproj": [[LG]],
                "src/Billing.Api/Program.cs": [[LG]],
                "src/Billing.Api/log4net.config": [[LG]],
            },
        },
        {
            "msg": "Stop writing crashes to the Windows event log",
            "ops": [
                (
                    "sub",
                    "src/Billing.Api/Program.cs",
                    '            EventLog.WriteEntry("BillingApi", ex.ToString(), EventLogEntryType.Error);\n',
                    "",
                ),
                ("sub", "src/Billing.Api/Program.cs", "using System.Diagnostics;\n", ""),
            ],
            "labels": {"src/Billing.Api/Program.cs": [[], [LG]]},
        },
        {
            "msg": "Port invoice stamp rendering to ImageSharp",
            "ops": [
                ("write", "src/Billing.Api/InvoiceRenderer.cs", lines(
                    "using SixLabors.Fonts;",
                    "using SixLabors.ImageSharp;",
                    "using SixLabors.ImageSharp.Drawing.Processing;",
                    "using SixLabors.ImageSharp.PixelFormats;",
                    "using SixLabors.ImageSharp.Processing;",
                    "namespace Billing.Api",
                    "{",
                    "    public sealed class InvoiceRenderer",
                    "    {",
                    "        public byte[] RenderStamp(string text)",
                    "        {",
                    "            using var img = new Image<Rgba32>(320, 80);",
                    '            var font = SystemFonts.CreateFont("DejaVu Sans", 14);',
                    "            img.Mutate(c => c.DrawText(text, font, Color.Black, new PointF(4, 4)));",
                    "            using var ms = new System.IO.MemoryStream();",
                    "            img.SaveAsPng(ms);",
                    "            return ms.ToArray();",
                    "        }",
                    "    }",
                    "}",
                )),
                (
                    "sub",
                    "src/Billing.Api/Billing.Api.csproj",
                    '    <PackageReference Include="System.Drawing.Common" Version="6.0.0" />\n',
                    '    <PackageReference Include="SixLabors.ImageSharp.Drawing" Version="1.0.0-beta15" />\n',
                ),
            ],
            "labels": {
                "src/Billing.Api/Billing.Api.csproj": [[SD]],
                "src/Billing.Api/InvoiceRenderer.cs": [[SD]],
            },
        },
        {
            "msg": "Refresh logo",
            "ops": [("write", "assets/logo.png", b"\x89PNG\r\n\x1a\n\x00\x00\x00\rIHDR\x00\x02\x00\x02")],
            "labels": {},
        },
        {
            "msg": "Use forward slashes in the build script",
            "ops": [
                ("sub", "scripts/build.ps1", '$out = "C:\\build\\billing"', '$out = "/build/billing"'),
                ("sub", "scripts/build.ps1", "Copy-Item src\\Billing.Api\\bin\\* $out", "Copy-Item src/Billing.Api/bin/* $out"),
            ],
            # The second hunk has no drive letter; only the synthesized
            # separator pattern catches it.
            "labels": {"scripts/build.ps1": [[WIN], [WIN]]},
        },
        {
            "msg": "Fix typo in README",
            "ops": [("sub", "README.md", "Builds land in C:\\billing\\out by default.", "Builds land in C:\\billing\\out by default")],
            "labels": {"README.md": [[]]},
        },
        {
            "msg": "Add Linux container image",
            "ops": [("write", "Dockerfile", lines(
                "FROM mcr.microsoft.com/dotnet/aspnet:6.0",
                "WORKDIR /app",
                "COPY publish/ .",
                "EXPOSE 8080",
                'ENTRYPOINT ["dotnet", "Billing.Api.dll"]',
            ))],
            "labels": {"Dockerfile": [[DF]]},
        },
        {
            "msg": "Remove Windows container definition",
            "ops": [("rm", "Dockerfile.windows")],
            "labels": {"Dockerfile.windows": [[DF]]},
        },
        {
            "msg": "Turn deploy.cmd into a portable deploy.sh",
            "ops": [("mv", "scripts/deploy.cmd", "scripts/deploy.sh", BILLING_DEPLOY_SH)],
            "labels": {"scripts/deploy.sh": [[WIN]]},
        },
        {
            "msg": "Raise request timeout",
            "ops": [("sub", "src/Billing.Api/appsettings.json", '"RequestTimeoutSeconds": 30', '"RequestTimeoutSeconds": 60')],
            "labels": {"src/Billing.Api/appsettings.json": [[]]},
        },
        {
            "msg": "Document the exposed port",
            "ops": [("sub", "Dockerfile", "EXPOSE 8080\n", "# the api listens on 8080 inside the container\nEXPOSE 8080\n")],
            "labels": {"Dockerfile": [[]]},
        },
        {
            "msg": "Rename --verbose flag to --log-level",
            "ops": [
                (
                    "sub",
                    "src/Billing.Api/Program.cs",
                    '            var verbose = Array.IndexOf(args, "--verbose") >= 0;\n'
                    "            var host = BillingHost.Create(verbose);\n",
                    '            var level = Array.IndexOf(args, "--log-level") >= 0;\n'
                    "            var host = BillingHost.Create(level);\n",
                )
            ],
            "labels": {"src/Billing.Api/Program.cs": [[]]},
        },
    ],
}

# -------------------------------------------------------------- report-worker

REPORT_CSPROJ = lines(
    '<Project Sdk="Microsoft.NET.Sdk.Worker">',
    "  <PropertyGroup>",
    "    <TargetFramework>net6.0</TargetFramework>",
    "  </PropertyGroup>",
    "  <ItemGroup>",
    '    <PackageReference Include="System.Drawing.Common" Version="6.0.0" />',
    '    <PackageReference Include="Polly" Version="7.2.3" />',
    '    <PackageReference Include="Jaeger" Version="1.0.3" />',
    "  </ItemGroup>",
    "</Project>",
)

REPORT = {
    "id": "report-worker",
    "initial": {
        "src/ReportWorker/ReportWorker.csproj": REPORT_CSPROJ,
        "src/ReportWorker/ChartRenderer.cs": lines(
            "using System.Drawing;",
            "",
            "namespace ReportWorker",
            "{",
            "    public static class ChartRenderer",
            "    {",
            "        public static Bitmap Bars(int[] values)",
            "        {",
            "            var bmp = new Bitmap(values.Length * 10, 100);",
            "            using var g = Graphics.FromImage(bmp);",
            "            for (var i = 0; i < values.Length; i++)",
            "                g.FillRectangle(Brushes.SteelBlue, i * 10, 100 - values[i], 8, values[i]);",
            "            return bmp;",
            "        }",
            "    }",
            "}",
        ),
        "src/ReportWorker/Scheduler.cs": lines(
            "namespace ReportWorker",
            "{",
            "    public sealed class Scheduler",
            "    {",
            "        public void Run(Job job)",
            "        {",
            "            if (job.Owner.Name == null) return;",
            "            job.Execute();",
            "        }",
            "    }",
            "}",
        ),
        "src/ReportWorker/Tracing.cs": lines(
            "namespace ReportWorker",
            "{",
            "    public static class Tracing",
            "    {",
            '        public static string AgentHost => "localhost";',
            "    }",
            "}",
        ),
        "src/ReportWorker/Program.cs": lines(
            "namespace ReportWorker",
            "{",
            "    public static class Program",
            "    {",
            "        public static void Main(string[] args)",
            "        {",
            '            var outDir = Args.Value(args, "--out", "reports");',
            "            Worker.Run(outDir);",
            "        }",
            "    }",
            "}",
        ),
        "src/ReportWorker/appsettings.json": lines(
            "{",
            '  "ReportQueue": "reports",',
            '  "JaegerAgentHost": "localhost",',
            '  "JaegerAgentPort": 6831',
            "}",
        ),
        "deploy/install-jaeger.ps1": lines(
            '$bin = Join-Path $env:ProgramFiles "jaeger"',
            'New-Service -Name "jaeger-agent" -BinaryPathName "$bin/jaeger-agent.exe --reporter.grpc.host-port=collector:14250"',
            'Start-Service -Name "jaeger-agent"',
        ),
        "README.md": lines("# Report worker", "", "Renders scheduled reports."),
    },
    "commits": [
        {
            "msg": "Port chart rendering to SkiaSharp",
            "ops": [
                ("write", "src/ReportWorker/ChartRenderer.cs", lines(
                    "using SkiaSharp;",
                    "",
                    "namespace ReportWorker",
                    "{",
                    "    public static class ChartRenderer",
                    "    {",
                    "        public static SKBitmap Bars(int[] values)",
                    "        {",
                    "            var bmp = new SKBitmap(values.Length * 10, 100);",
                    "            using var canvas = new SKCanvas(bmp);",
                    "            using var paint = new SKPaint { Color = SKColors.SteelBlue };",
                    "            for (var i = 0; i < values.Length; i++)",
                    "                canvas.DrawRect(i * 10, 100 - values[i], 8, values[i], paint);",
                    "            return bmp;",
                    "        }",
                    "    }",
                    "}",
                )),
                (
                    "sub",
                    "src/ReportWorker/ReportWorker.csproj",
                    '<PackageReference Include="System.Drawing.Common" Version="6.0.0" />',
                    '<PackageReference Include="SkiaSharp" Version="2.88.3" />',
                ),
            ],
            # Only the using line names the library; the rest of the rewrite
            # is one hunk anyway.
            "labels": {
                "src/ReportWorker/ChartRenderer.cs": [[SD]],
                "src/ReportWorker/ReportWorker.csproj": [[SD]],
            },
        },
        {
            "msg": "Bump Polly",
            "ops": [("sub", "src/ReportWorker/ReportWorker.csproj", 'Version="7.2.3"', 'Version="7.2.4"')],
            "labels": {"src/ReportWorker/ReportWorker.csproj": [[]]},
        },
        {
            "msg": "Point tracing at the agent container",
            "ops": [("sub", "src/ReportWorker/appsettings.json", '"JaegerAgentHost": "localhost"', '"JaegerAgentHost": "jaeger-agent"')],
            "labels": {"src/ReportWorker/appsettings.json": [[JG]]},
            "after_edit": {"src/ReportWorker/appsettings.json": [[]]},
        },
        {
            "msg": "Drop the Windows service installer for the tracing agent",
            "ops": [("rm", "deploy/install-jaeger.ps1")],
            "labels": {"deploy/install-jaeger.ps1": [[JG]]},
            "after_edit": {"deploy/install-jaeger.ps1": [[]]},
        },
        {
            "msg": "Add Kubernetes deployment with tracing sidecar",
            "ops": [("write", "deploy/k8s/deployment.yaml", lines(
                "apiVersion: apps/v1",
                "kind: Deployment",
                "metadata:",
                "  name: report-worker",
                "spec:",
                "  template:",
                "    spec:",
                "      containers:",
                "        - name: worker",
                "          image: registry.local/report-worker:latest",
                "          env:",
                "            - name: JAEGER_AGENT_HOST",
                "              value: localhost",
                "        - name: tracing",
                "          image: jaegertracing/jaeger-agent:1.38",
            ))],
            "labels": {"deploy/k8s/deployment.yaml": [[JG]]},
        },
        {
            "msg": "Add container image",
            "ops": [("write", "Dockerfile", lines(
                "FROM mcr.microsoft.com/dotnet/runtime:6.0",
                "WORKDIR /app",
                "COPY publish/ .",
                'ENTRYPOINT ["dotnet", "ReportWorker.dll"]',
            ))],
            "labels": {"Dockerfile": [[DF]]},
        },
        {
            "msg": "Fix null check in scheduler",
            "ops": [("sub", "src/ReportWorker/Scheduler.cs", "if (job.Owner.Name == null) return;", "if (job.Owner?.Name == null) return;")],
            "labels": {"src/ReportWorker/Scheduler.cs": [[]]},
        },
        {
            "msg": "Add sample report image",
            "ops": [("write", "docs/sample.png", b"\x89PNG\r\n\x1a\n\x00\x00\x00\x00sample")],
            "labels": {},
        },
        {
            "msg": "Read the tracing agent host from the environment",
            "ops": [(
                "sub",
                "src/ReportWorker/Tracing.cs",
                '        public static string AgentHost => "localhost";',
                '        public static string AgentHost =>\n            System.Environment.GetEnvironmentVariable("JAEGER_AGENT_HOST") ?? "localhost";',
            )],
            # The keyword is there but *.cs is outside the KB's globs.
            "labels": {"src/ReportWorker/Tracing.cs": [[]]},
        },
        {
            "msg": "Document tracing setup",
            "ops": [("sub", "README.md", "Renders scheduled reports.\n", "Renders scheduled reports.\n\nTraces go to the jaegertracing agent sidecar.\n")],
            "labels": {"README.md": [[]]},
        },
        {
            "msg": "Pin runtime image patch version",
            "ops": [("sub", "Dockerfile", "runtime:6.0\n", "runtime:6.0.9\n")],
            "labels": {"Dockerfile": [[DF]]},
        },
        {
            "msg": "Rename --out flag to --output-dir",
            "ops": [("sub", "src/ReportWorker/Program.cs", '"--out"', '"--output-dir"')],
            "labels": {"src/ReportWorker/Program.cs": [[]]},
        },
    ],
}

# -------------------------------------------------------------------- gateway

GATEWAY_DEPLOYMENT = lines(
    "apiVersion: apps/v1",
    "kind: Deployment",
    "metadata:",
    "  name: gateway",
    "spec:",
    "  replicas: 2",
    "  template:",
    "    metadata:",
    "      annotations:",
    '        dapr.io/enabled: "true"',
    '        dapr.io/app-id: "gateway"',
    '        dapr.io/app-port: "80"',
    "    spec:",
    "      serviceAccountName: gateway",
    "      nodeSelector:",
    "        kubernetes.io/os: linux",
    "      securityContext:",
    "        runAsNonRoot: true",
    "      terminationGracePeriodSeconds: 30",
    "      containers:",
    "        - name: gateway",
    "          image: registry.local/gateway:latest",
)

GATEWAY = {
    "id": "gateway",
    "initial": {
        "src/Gateway/Gateway.csproj": lines(
            '<Project Sdk="Microsoft.NET.Sdk.Web">',
            "  <ItemGroup>",
            '    <PackageReference Include="Yarp.ReverseProxy" Version="1.1.0" />',
            "  </ItemGroup>",
            "</Project>",
        ),
        "src/Gateway/Program.cs": lines(
            'var port = Args.Int(args, "--port", 80);',
            "var app = GatewayApp.Build(port);",
            "app.Run();",
        ),
        # No trailing newline on purpose.
        "config/gateway.json": '{\n  "Routes": "routes.json",\n  "JaegerAgentHost": "localhost"\n}',
        "deploy/iis/web.config": lines(
            "<configuration>",
            "  <system.webServer>",
            '    <aspNetCore processPath="dotnet" arguments="Gateway.dll" />',
            "  </system.webServer>",
            "</configuration>",
        ),
        "wwwroot/favicon.ico": b"\x00\x00\x01\x00\x01\x00\x10\x10\x00\x00favicon",
    },
    "commits": [
        {
            "msg": "Add Kubernetes deployment",
            "ops": [("write", "deploy/k8s/deployment.yaml", GATEWAY_DEPLOYMENT)],
            "labels": {"deploy/k8s/deployment.yaml": [[K8]]},
        },
        {
            "msg": "Enable mesh sidecar injection",
            "ops": [("sub", "deploy/k8s/deployment.yaml", "      annotations:\n", '      annotations:\n        sidecar.istio.io/inject: "true"\n')],
            "labels": {"deploy/k8s/deployment.yaml": [[K8]]},
        },
        {
            "msg": "Run the tracing agent next to the gateway",
            "ops": [("write", "deploy/k8s/deployment.yaml", GATEWAY_DEPLOYMENT.replace("      annotations:\n", '      annotations:\n        sidecar.istio.io/inject: "true"\n') + lines(
                "        - name: tracing",
                "          image: jaegertracing/jaeger-agent:1.38",
            ))],
            "labels": {"deploy/k8s/deployment.yaml": [[JG]]},
        },
        {
            "msg": "Add service manifest",
            "ops": [("write", "deploy/k8s/service.yml", lines(
                "apiVersion: v1",
                "kind: Service",
                "metadata:",
                "  name: gateway",
                "  annotations:",
                '    dapr.io/app-port: "80"',
                "    tracing/env: JAEGER_AGENT_HOST",
                "spec:",
                "  ports:",
                "    - port: 80",
            ))],
            "labels": {"deploy/k8s/service.yml": [[JG, K8]]},
        },
        {
            "msg": "Read the agent host from the environment",
            "ops": [("sub", "config/gateway.json", '"JaegerAgentHost": "localhost"', '"AgentHostVariable": "JAEGER_AGENT_HOST"')],
            "labels": {"config/gateway.json": [[JG]]},
        },
        {
            "msg": "Add container image",
            "ops": [("write", "Dockerfile", lines(
                "FROM mcr.microsoft.com/dotnet/aspnet:6.0",
                "COPY publish/ /app",
                'ENTRYPOINT ["dotnet", "/app/Gateway.dll"]',
            ))],
            "labels": {"Dockerfile": [[DF]]},
        },
        {
            "msg": "Add helm values",
            "ops": [("write", "deploy/helm/values.yaml", lines(
                "replicaCount: 2",
                "daprEnabled: true",
                "annotations: {}",
            ))],
            "labels": {"deploy/helm/values.yaml": [[]]},
        },
        {
            "msg": "Bump YARP",
            "ops": [("sub", "src/Gateway/Gateway.csproj", 'Version="1.1.0"', 'Version="1.1.1"')],
            "labels": {"src/Gateway/Gateway.csproj": [[]]},
        },
        {
            "msg": "Rename --port flag to --listen",
            "ops": [("sub", "src/Gateway/Program.cs", '"--port"', '"--listen"')],
            "labels": {"src/Gateway/Program.cs": [[]]},
        },
        {
            "msg": "Remove IIS hosting config",
            "ops": [("rm", "deploy/iis/web.config")],
            "labels": {"deploy/iis/web.config": [[]]},
        },
        {
            "msg": "Build inside the container",
            "ops": [("write", "Dockerfile", lines(
                "FROM mcr.microsoft.com/dotnet/sdk:6.0 AS build",
                "WORKDIR /src",
                "COPY . .",
                "RUN dotnet publish src/Gateway -c Release -o /publish",
                "",
                "FROM mcr.microsoft.com/dotnet/aspnet:6.0",
                "COPY --from=build /publish /app",
                'ENTRYPOINT ["dotnet", "/app/Gateway.dll"]',
            ))],
            "labels": {"Dockerfile": [[DF]]},
        },
        {
            "msg": "Move app port to 8080",
            "ops": [("sub", "deploy/k8s/deployment.yaml", 'dapr.io/app-port: "80"', 'dapr.io/app-port: "8080"')],
            "labels": {"deploy/k8s/deployment.yaml": [[K8]]},
        },
        {
            "msg": "Move favicon under icons",
            "ops": [("mv", "wwwroot/favicon.ico", "wwwroot/icons/favicon.ico", None)],
            "labels": {},
        },
    ],
}

# -------------------------------------------------------------- inventory-sync

INVENTORY = {
    "id": "inventory-sync",
    "initial": {
        "scripts/sync.bat": lines(
            "@echo off",
            "set DATA_DIR=D:\\inventory\\data",
            "set LOG_DIR=D:\\inventory\\logs",
            "dotnet InventorySync.dll --data %DATA_DIR% --logs %LOG_DIR%",
        ),
        "scripts/install-agent.ps1": lines(
            "# tracing agent runs as a Windows service",
            'New-Service -Name "tracing" -BinaryPathName "C:\\tools\\jaeger-agent.exe"',
            'Start-Service -Name "tracing"',
        ),
        "scripts/publish.ps1": lines(
            "dotnet publish src\\InventorySync\\InventorySync.csproj -o out\\publish",
        ),
        "src/InventorySync/InventorySync.csproj": lines(
            '<Project Sdk="Microsoft.NET.Sdk.Worker">',
            "  <ItemGroup>",
            '    <PackageReference Include="Dapper" Version="2.0.123" />',
            '    <PackageReference Include="Microsoft.Extensions.Logging.EventLog" Version="6.0.0" />',
            "  </ItemGroup>",
            "</Project>",
        ),
        "src/InventorySync/Program.cs": lines(
            "using Microsoft.Extensions.Hosting;",
            "using Microsoft.Extensions.Logging;",
            "",
            "// Entry point for the inventroy sync worker.",
            "var dry = Args.Flag(args, \"--dry\");",
            "var scratch = System.IO.Path.Combine(@\"C:\\temp\", \"inventory\");",
            "Host.CreateDefaultBuilder(args)",
            "    .ConfigureLogging(logging => logging.AddEventLog())",
            "    .ConfigureServices(s => s.AddSync(dry, scratch))",
            "    .Build()",
            "    .Run();",
        ),
        "config/tracing.json": lines("{", '  "agent": "localhost:6831"', "}"),
        "config/sync.json": lines("{", '  "batchSize": 100', "}"),
        "README.md": lines("# Inventory sync", "", "Data lives under D:\\inventory on the host."),
    },
    "commits": [
        {
            "msg": "Use Linux paths in the sync script",
            "ops": [
                ("sub", "scripts/sync.bat", "D:\\inventory\\data", "/var/lib/inventory/data"),
                ("sub", "scripts/sync.bat", "D:\\inventory\\logs", "/var/log/inventory"),
            ],
            "labels": {"scripts/sync.bat": [[WIN]]},
        },
        {
            "msg": "Drop the Windows tracing agent installer",
            "ops": [("rm", "scripts/install-agent.ps1")],
            "labels": {"scripts/install-agent.ps1": [[JG, WIN]]},
            "after_edit": {"scripts/install-agent.ps1": [[WIN]]},
        },
        {
            "msg": "Point tracing at the agent container",
            "ops": [("sub", "config/tracing.json", "localhost:6831", "jaeger-agent:6831")],
            "labels": {"config/tracing.json": [[JG]]},
            "after_edit": {"config/tracing.json": [[]]},
        },
        {
            "msg": "Log to the console instead of the event log",
            "ops": [
                ("sub", "src/InventorySync/InventorySync.csproj", '    <PackageReference Include="Microsoft.Extensions.Logging.EventLog" Version="6.0.0" />\n', ""),
                ("sub", "src/InventorySync/Program.cs", "logging.AddEventLog()", "logging.AddConsole()"),
            ],
            "labels": {
                "src/InventorySync/InventorySync.csproj": [[LG]],
                "src/InventorySync/Program.cs": [[LG]],
            },
        },
        {
            "msg": "Fix typo in comment",
            "ops": [("sub", "src/InventorySync/Program.cs", "inventroy", "inventory")],
            "labels": {"src/InventorySync/Program.cs": [[]]},
        },
        {
            "msg": "Bump Dapper",
            "ops": [("sub", "src/InventorySync/InventorySync.csproj", 'Version="2.0.123"', 'Version="2.1.4"')],
            "labels": {"src/InventorySync/InventorySync.csproj": [[]]},
        },
        {
            "msg": "Add sample data fixture",
            "ops": [("write", "data/sample.xlsx", b"PK\x03\x04\x14\x00\x00\x00\x08\x00sample")],
            "labels": {},
        },
        {
            "msg": "Add cron wrapper",
            "ops": [("write", "scripts/cron.sh", lines(
                "#!/bin/sh",
                "# output used to go to the eventlog; stdout is collected now",
                "exec dotnet /app/InventorySync.dll 2>&1",
            ))],
            # Lowercase "eventlog" does not match the case-sensitive keyword.
            "labels": {"scripts/cron.sh": [[]]},
        },
        {
            "msg": "Use forward slashes in the publish script",
            "ops": [("write", "scripts/publish.ps1", lines("dotnet publish src/InventorySync/InventorySync.csproj -o out/publish"))],
            "labels": {"scripts/publish.ps1": [[WIN]]},
        },
        {
            "msg": "Document the new data location",
            "ops": [("sub", "README.md", "Data lives under D:\\inventory on the host.", "Data lives under /var/lib/inventory (formerly D:\\inventory).")],
            "labels": {"README.md": [[]]},
        },
        {
            "msg": "Rename --dry flag to --dry-run",
            "ops": [("sub", "src/InventorySync/Program.cs", '"--dry"', '"--dry-run"')],
            "labels": {"src/InventorySync/Program.cs": [[]]},
        },
        {
            "msg": "Increase sync batch size",
            "ops": [("sub", "config/sync.json", '"batchSize": 100', '"batchSize": 500')],
            "labels": {"config/sync.json": [[]]},
        },
        {
            "msg": "Use the system temp directory for scratch files",
            "ops": [("sub", "src/InventorySync/Program.cs", 'System.IO.Path.Combine(@"C:\\temp", "inventory")', 'System.IO.Path.Combine(System.IO.Path.GetTempPath(), "inventory")')],
            # Drive letter in C# source: outside the KB's globs.
            "labels": {"src/InventorySync/Program.cs": [[]]},
        },
    ],
}

SERVICES = [BILLING, REPORT, GATEWAY, INVENTORY]

# ------------------------------------------------------------------ plumbing

GIT_ENV = {
    "GIT_AUTHOR_NAME": "Migration Team",
    "GIT_AUTHOR_EMAIL": "migration@example.com",
    "GIT_COMMITTER_NAME": "Migration Team",
    "GIT_COMMITTER_EMAIL": "migration@example.com",
    "GIT_CONFIG_NOSYSTEM": "1",
    "GIT_CONFIG_GLOBAL": os.devnull,
    "TZ": "UTC",
}


def git(repo, *args, date=None):
    env = dict(os.environ, **GIT_ENV)
    if date:
        env["GIT_AUTHOR_DATE"] = env["GIT_COMMITTER_DATE"] = date
    out = subprocess.run(["git", "-C", str(repo), *args], env=env, check=True, capture_output=True)
    return out.stdout


def put(repo, path, content):
    p = repo / path
    p.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(content, bytes):
        p.write_bytes(content)
    else:
        p.write_bytes(content.encode())


def apply(repo, op):
    kind = op[0]
    if kind == "write":
        put(repo, op[1], op[2])
    elif kind == "sub":
        _, path, old, new = op
        text = (repo / path).read_text()
        assert text.count(old) == 1, f"{path}: {old!r} occurs {text.count(old)} times"
        (repo / path).write_text(text.replace(old, new))
    elif kind == "rm":
        (repo / op[1]).unlink()
    elif kind == "mv":
        _, old, new, content = op
        data = (repo / old).read_bytes()
        (repo / old).unlink()
        put(repo, new, data if content is None else content)
    else:
        raise ValueError(kind)


HUNK = re.compile(r"^@@ -(\d+)(?:,\d+)? \+\d+(?:,\d+)? @@")


def patch_hunks(text):
    """(path, old_start) per hunk, in patch order."""
    out = []
    old = new = None
    for line in text.split("\n"):
        if line.startswith("diff --git "):
            old = new = None
        elif line.startswith("--- "):
            old = line[4:].removeprefix("a/")
        elif line.startswith("+++ "):
            new = line[4:].removeprefix("b/")
        else:
            m = HUNK.match(line)
            if m:
                path = old if new == "/dev/null" else new
                out.append((path, int(m.group(1))))
    return out


def build_service(svc, tmp):
    repo = tmp / svc["id"]
    repo.mkdir()
    git(repo, "init", "-q", "-b", "main")
    for path, content in svc["initial"].items():
        put(repo, path, content)
    git(repo, "add", "-A")
    git(repo, "commit", "-q", "-m", "Initial Windows deployment", date="2022-03-01T09:00:00Z")
    pre_ref = git(repo, "rev-parse", "--short=12", "HEAD").decode().strip()

    out_dir = ROOT / "services" / svc["id"]
    out_dir.mkdir(parents=True)
    commits, hunks = [], []
    for n, c in enumerate(svc["commits"], start=1):
        for op in c["ops"]:
            apply(repo, op)
        git(repo, "add", "-A")
        git(repo, "commit", "-q", "-m", c["msg"], date=f"2022-03-{1 + n:02d}T10:00:00Z")
        cid = git(repo, "rev-parse", "--short=12", "HEAD").decode().strip()
        patch = git(repo, "format-patch", "-1", "--stdout", "-M", "--no-signature", "HEAD").decode()
        (out_dir / f"{n:04d}-{cid}.patch").write_text(patch)
        commits.append(cid)

        found = patch_hunks(patch)
        expected = []
        for path in sorted(c["labels"]):
            after = c.get("after_edit", {}).get(path, c["labels"][path])
            for kbs, kbs_after in zip(c["labels"][path], after, strict=True):
                expected.append((path, sorted(kbs), sorted(kbs_after)))
        got_paths = sorted(p for p, _ in found)
        want_paths = sorted(p for p, _, _ in expected)
        assert got_paths == want_paths, f"{svc['id']} commit {n}: hunks {found} vs labels {want_paths}"
        by_path = {}
        for path, start in found:
            by_path.setdefault(path, []).append(start)
        for path, kbs, kbs_after in expected:
            start = by_path[path].pop(0)
            hunks.append({
                "commit": cid,
                "path": path,
                "old_start": start,
                "kbs": kbs,
                "kbs_after_edit": kbs_after,
            })
    return {"pre_ref": pre_ref, "commits": commits, "hunks": hunks}


def expected_delta(services):
    def index(key):
        inst = {}
        for sid, s in services.items():
            for h in s["hunks"]:
                for kb in h[key]:
                    inst.setdefault(f"{sid}/{kb}", set()).add((h["commit"], h["path"], h["old_start"]))
        return inst

    before, after = index("kbs"), index("kbs_after_edit")
    ref = lambda t: {"commit": t[0], "path": t[1], "old_start": t[2]}
    changed = []
    for k in sorted(before.keys() & after.keys()):
        if before[k] != after[k]:
            changed.append({
                "key": k,
                "hunks_added": [ref(t) for t in sorted(after[k] - before[k])],
                "hunks_removed": [ref(t) for t in sorted(before[k] - after[k])],
            })
    return {
        "added": sorted(after.keys() - before.keys()),
        "removed": sorted(before.keys() - after.keys()),
        "changed": changed,
    }


def write_config(services):
    out = [
        'kb_root = "kbs"',
        "",
        "[synth]",
        'backend = "rulebook"',
    ]
    for sid, s in services.items():
        out += [
            "",
            "[[service]]",
            f'service_id = "{sid}"',
            f'source = "services/{sid}"',
            f'pre_ref = "{s["pre_ref"]}"',
            "migration_commits = [",
            *[f'    "{c}",' for c in s["commits"]],
            "]",
        ]
    (ROOT / "migbench.toml").write_text("\n".join(out) + "\n")


def write_agent_patch(svc_id, services, tmp, name, keep):
    """Replays the service's history but keeps only hunks accepted by
    `keep`, then emits the cumulative diff from the pre-migration ref."""
    repo = tmp / svc_id
    base = services[svc_id]["pre_ref"]
    work = tmp / f"{name}-work"
    git(repo, "worktree", "add", "-q", "--detach", str(work), base)
    full = git(repo, "diff", "--no-color", "--no-renames", base, "HEAD").decode()
    # Drop file sections whose hunks are all rejected; a hunk-level filter
    # would have to re-anchor line numbers, so the fixture keeps it simple.
    sections = re.split(r"(?m)^(?=diff --git )", full)
    kept = [s for s in sections if s.startswith("diff --git ") and keep(s)]
    (ROOT / "agents" / f"{name}.diff").write_text("".join(kept))
    git(repo, "worktree", "remove", "--force", str(work))


def main():
    if ROOT.joinpath("services").exists():
        shutil.rmtree(ROOT / "services")
    if ROOT.joinpath("agents").exists():
        shutil.rmtree(ROOT / "agents")
    (ROOT / "agents").mkdir(parents=True)
    services = {}
    with tempfile.TemporaryDirectory() as t:
        tmp = Path(t)
        for svc in SERVICES:
            services[svc["id"]] = build_service(svc, tmp)

        def win_only(section):
            head = section.split("\n", 1)[0]
            return head.endswith((".bat", ".ps1")) and "install-agent" not in head

        write_agent_patch("inventory-sync", services, tmp, "inventory-sync-partial", win_only)
        write_agent_patch("inventory-sync", services, tmp, "inventory-sync-full", lambda s: True)

    write_config(services)
    labels = {
        "edit": {
            "kb_id": EDIT_KB,
            "removed_keyword": EDIT_KEYWORD,
            "expected_delta": expected_delta(services),
        },
        "services": services,
    }
    (ROOT / "labels.json").write_text(json.dumps(labels, indent=2, sort_keys=True) + "\n")
    total = sum(len(s["commits"]) for s in services.values())
    hunks = sum(len(s["hunks"]) for s in services.values())
    print(f"{len(services)} services, {total} commits, {hunks} text hunks")


if __name__ == "__main__":
    main()
